#pragma once

#include <array>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "uqvae/forward_model.hpp"
#include "uqvae/linalg.hpp"

namespace uqvae {

struct ChamberParams {
  double EA = 0.0;
  double EB = 0.0;
  double V_U = 0.0;
  // Timing as fractions of the heartbeat period; relaxation starts at tC + TC.
  double tC = 0.0;
  double TC = 0.0;
  double TR = 0.0;
};

struct CardioParams {
  ChamberParams LA, LV, RA, RV;
  double R_min = 0.0, R_max = 0.0;
  double R_AR_SYS = 0.0, C_AR_SYS = 0.0, L_AR_SYS = 0.0;
  double R_VEN_SYS = 0.0, C_VEN_SYS = 0.0, L_VEN_SYS = 0.0;
  double R_AR_PUL = 0.0, C_AR_PUL = 0.0, L_AR_PUL = 0.0;
  double R_VEN_PUL = 0.0, C_VEN_PUL = 0.0, L_VEN_PUL = 0.0;
  double HR = 0.0;  // beats per minute
  // Septal defect: off unless vsd is set.
  bool vsd = false;
  double r_VSD = 0.9;  // cm
  double r_AV = 1.5;   // cm

  static CardioParams reference();

  double period() const { return 60.0 / HR; }
  double r_vsd_resistance() const;

  // Named access using the parameter-table field names (EA_LV, R_AR_SYS, HR, r_VSD, ...).
  double get(std::string_view name) const;
  void set(std::string_view name, double value);
  static const std::vector<std::string>& gsa_names();
};

inline constexpr int kCardioStates = 12;
using CardioState = std::array<double, kCardioStates>;

enum CardioStateIndex : int {
  V_LA, V_LV, V_RA, V_RV,
  P_AR_SYS, P_VEN_SYS, P_AR_PUL, P_VEN_PUL,
  Q_AR_SYS, Q_VEN_SYS, Q_AR_PUL, Q_VEN_PUL,
};

const std::array<const char*, kCardioStates>& cardio_state_names();

CardioState cardio_default_initial_state();

double valve_resistance(double dp, double r_min, double r_max);
double valve_flux(double dp, double r_min, double r_max);
// Normalized activation in [0, 1]; t in seconds.
double chamber_activation(double t, const ChamberParams& c, double period);

struct ChamberPressures {
  double LA, LV, RA, RV;
};
struct ValveFluxes {
  double MV, AV, TV, PV, VSD;
};

ChamberPressures chamber_pressures(double t, const CardioState& x, const CardioParams& p);
ValveFluxes valve_fluxes(const CardioState& x, const ChamberPressures& pc, const CardioParams& p);
CardioState cardio_rhs(double t, const CardioState& x, const CardioParams& p);

struct CardioSimOptions {
  double dt = 1e-4;
  int beats = 25;
  int samples_per_beat = 1000;
  CardioState x0 = cardio_default_initial_state();
};

struct CardioTrajectory {
  Vec t;             // samples_per_beat + 1 points spanning the last beat
  Mat states;        // rows = time, cols = 12 states
  Mat pressures;     // LA, LV, RA, RV
  Mat fluxes;        // MV, AV, TV, PV, VSD
  double periodicity = 0.0;  // max_i |x_i(end) − x_i(start)| / max_t |x_i| over the last beat
  double dt_used = 0.0;
  double hr = 0.0;

  bool periodic(double tol = 0.05) const { return periodicity <= tol; }
};

CardioTrajectory cardio_simulate(const CardioParams& p, const CardioSimOptions& opt = {});

// Total blood volume: chambers plus compliance-stored volumes.
double cardio_blood_volume(const CardioState& x, const CardioParams& p);

const std::vector<std::string>& cardio_output_names();

struct CardioOutputs {
  Vec values;  // aligned with cardio_output_names()
  double get(std::string_view name) const;
};

struct OutputRange {
  double low = -std::numeric_limits<double>::infinity();
  double high = std::numeric_limits<double>::infinity();
  double model_value = std::numeric_limits<double>::quiet_NaN();
};
// Healthy ranges and reference model values of the 28 clinical outputs.
OutputRange cardio_output_range(std::string_view name);

// LV end-diastolic volume over its indexed value: (67.6 + 50.6) / 66.0.
inline constexpr double kDefaultBsa = 1.79;

CardioOutputs cardio_outputs(const CardioTrajectory& traj, double bsa = kDefaultBsa);

// Maps log-parameters to selected clinical outputs through a full simulation.
class CardioForward final : public ForwardModel {
 public:
  CardioForward(CardioParams base, std::vector<std::string> param_names,
                std::vector<std::string> output_names, CardioSimOptions opt = {},
                double bsa = kDefaultBsa);
  Eigen::Index param_dim() const override { return static_cast<Eigen::Index>(param_names_.size()); }
  Eigen::Index obs_dim() const override { return static_cast<Eigen::Index>(output_idx_.size()); }
  std::string name() const override { return base_.vsd ? "cardio_vsd" : "cardio"; }

  CardioParams params_at(const Vec& log_u) const;
  Vec reference_log_params() const;
  const std::vector<std::string>& param_names() const { return param_names_; }
  std::vector<std::string> output_names() const;

 protected:
  Vec eval_impl(const Vec& log_u) const override;

 private:
  CardioParams base_;
  std::vector<std::string> param_names_;
  std::vector<int> output_idx_;
  CardioSimOptions opt_;
  double bsa_;
};

// Multiplicative ranges [low, high] around the reference value.
struct ParamRange {
  std::string name;
  double low_factor = 0.75;
  double high_factor = 1.25;
};
std::vector<ParamRange> cardio_ranges_uniform(const std::vector<std::string>& names, double spread = 0.25);
// ±25% widened by the hypertension modifications (additive on the factors).
std::vector<ParamRange> cardio_ranges_hypertension(const std::vector<std::string>& names);

// (log b − log a)²/12 per parameter.
Vec log_uniform_prior_variance(const std::vector<ParamRange>& ranges);

}  // namespace uqvae
