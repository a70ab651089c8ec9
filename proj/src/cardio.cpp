#include "uqvae/cardio.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "uqvae/error.hpp"

namespace uqvae {

namespace {

using ParamPtr = double CardioParams::*;
using ChamberPtr = ChamberParams CardioParams::*;

struct FieldRef {
  ChamberPtr chamber = nullptr;
  double ChamberParams::*chamber_field = nullptr;
  ParamPtr field = nullptr;
};

const std::unordered_map<std::string_view, FieldRef>& field_table() {
  static const std::unordered_map<std::string_view, FieldRef> table = [] {
    std::unordered_map<std::string_view, FieldRef> t;
    t["EA_LA"] = {&CardioParams::LA, &ChamberParams::EA, nullptr};
    t["EB_LA"] = {&CardioParams::LA, &ChamberParams::EB, nullptr};
    t["V_U_LA"] = {&CardioParams::LA, &ChamberParams::V_U, nullptr};
    t["EA_LV"] = {&CardioParams::LV, &ChamberParams::EA, nullptr};
    t["EB_LV"] = {&CardioParams::LV, &ChamberParams::EB, nullptr};
    t["V_U_LV"] = {&CardioParams::LV, &ChamberParams::V_U, nullptr};
    t["EA_RA"] = {&CardioParams::RA, &ChamberParams::EA, nullptr};
    t["EB_RA"] = {&CardioParams::RA, &ChamberParams::EB, nullptr};
    t["V_U_RA"] = {&CardioParams::RA, &ChamberParams::V_U, nullptr};
    t["EA_RV"] = {&CardioParams::RV, &ChamberParams::EA, nullptr};
    t["EB_RV"] = {&CardioParams::RV, &ChamberParams::EB, nullptr};
    t["V_U_RV"] = {&CardioParams::RV, &ChamberParams::V_U, nullptr};
    t["tC_LA"] = {&CardioParams::LA, &ChamberParams::tC, nullptr};
    t["TC_LA"] = {&CardioParams::LA, &ChamberParams::TC, nullptr};
    t["TR_LA"] = {&CardioParams::LA, &ChamberParams::TR, nullptr};
    t["tC_LV"] = {&CardioParams::LV, &ChamberParams::tC, nullptr};
    t["TC_LV"] = {&CardioParams::LV, &ChamberParams::TC, nullptr};
    t["TR_LV"] = {&CardioParams::LV, &ChamberParams::TR, nullptr};
    t["tC_RA"] = {&CardioParams::RA, &ChamberParams::tC, nullptr};
    t["TC_RA"] = {&CardioParams::RA, &ChamberParams::TC, nullptr};
    t["TR_RA"] = {&CardioParams::RA, &ChamberParams::TR, nullptr};
    t["tC_RV"] = {&CardioParams::RV, &ChamberParams::tC, nullptr};
    t["TC_RV"] = {&CardioParams::RV, &ChamberParams::TC, nullptr};
    t["TR_RV"] = {&CardioParams::RV, &ChamberParams::TR, nullptr};
    t["R_min"] = {nullptr, nullptr, &CardioParams::R_min};
    t["R_max"] = {nullptr, nullptr, &CardioParams::R_max};
    t["R_AR_SYS"] = {nullptr, nullptr, &CardioParams::R_AR_SYS};
    t["C_AR_SYS"] = {nullptr, nullptr, &CardioParams::C_AR_SYS};
    t["L_AR_SYS"] = {nullptr, nullptr, &CardioParams::L_AR_SYS};
    t["R_VEN_SYS"] = {nullptr, nullptr, &CardioParams::R_VEN_SYS};
    t["C_VEN_SYS"] = {nullptr, nullptr, &CardioParams::C_VEN_SYS};
    t["L_VEN_SYS"] = {nullptr, nullptr, &CardioParams::L_VEN_SYS};
    t["R_AR_PUL"] = {nullptr, nullptr, &CardioParams::R_AR_PUL};
    t["C_AR_PUL"] = {nullptr, nullptr, &CardioParams::C_AR_PUL};
    t["L_AR_PUL"] = {nullptr, nullptr, &CardioParams::L_AR_PUL};
    t["R_VEN_PUL"] = {nullptr, nullptr, &CardioParams::R_VEN_PUL};
    t["C_VEN_PUL"] = {nullptr, nullptr, &CardioParams::C_VEN_PUL};
    t["L_VEN_PUL"] = {nullptr, nullptr, &CardioParams::L_VEN_PUL};
    t["HR"] = {nullptr, nullptr, &CardioParams::HR};
    t["r_VSD"] = {nullptr, nullptr, &CardioParams::r_VSD};
    t["r_AV"] = {nullptr, nullptr, &CardioParams::r_AV};
    return t;
  }();
  return table;
}

const FieldRef& lookup(std::string_view name) {
  const auto& t = field_table();
  auto it = t.find(name);
  if (it == t.end()) fail(ErrorKind::ConfigError, "unknown cardio parameter '" + std::string(name) + "'");
  return it->second;
}

double positive_mod(double x, double period) {
  double r = std::fmod(x, period);
  return r < 0.0 ? r + period : r;
}

}  // namespace

CardioParams CardioParams::reference() {
  CardioParams p;
  p.LA = {0.2273, 0.209, 2.0, 0.79, 0.11, 0.8};
  p.LV = {3.0391, 0.10, 16.0, 0.0, 0.35, 0.4};
  p.RA = {0.0429, 0.0636, 2.0, 0.8, 0.1, 0.7};
  p.RV = {0.6683, 0.07, 16.0, 0.0, 0.3, 0.4};
  p.R_min = 0.0075;
  p.R_max = 75006.2;
  p.R_AR_SYS = 0.588;
  p.C_AR_SYS = 0.96;
  p.L_AR_SYS = 0.005;
  p.R_VEN_SYS = 0.352;
  p.C_VEN_SYS = 60.0;
  p.L_VEN_SYS = 0.0005;
  p.R_AR_PUL = 0.104;
  p.C_AR_PUL = 5.0;
  p.L_AR_PUL = 0.0005;
  p.R_VEN_PUL = 0.0105;
  p.C_VEN_PUL = 16.0;
  p.L_VEN_PUL = 0.0005;
  p.HR = 75.0;
  return p;
}

double CardioParams::r_vsd_resistance() const {
  const double ratio = r_AV / r_VSD;
  return R_min * ratio * ratio * ratio * ratio;
}

double CardioParams::get(std::string_view name) const {
  const FieldRef& f = lookup(name);
  if (f.field) return this->*f.field;
  return (this->*f.chamber).*f.chamber_field;
}

void CardioParams::set(std::string_view name, double value) {
  const FieldRef& f = lookup(name);
  if (f.field) {
    this->*f.field = value;
  } else {
    (this->*f.chamber).*f.chamber_field = value;
  }
}

const std::vector<std::string>& CardioParams::gsa_names() {
  static const std::vector<std::string> names = {
      "EA_LA",    "EB_LA",     "V_U_LA",    "EA_LV",     "EB_LV",    "V_U_LV",   "EA_RA",
      "EB_RA",    "V_U_RA",    "EA_RV",     "EB_RV",     "V_U_RV",   "R_min",    "R_max",
      "R_AR_SYS", "C_AR_SYS",  "L_AR_SYS",  "R_VEN_SYS", "C_VEN_SYS", "L_VEN_SYS", "R_AR_PUL",
      "C_AR_PUL", "L_AR_PUL",  "R_VEN_PUL", "C_VEN_PUL", "L_VEN_PUL", "HR"};
  return names;
}

const std::array<const char*, kCardioStates>& cardio_state_names() {
  static const std::array<const char*, kCardioStates> names = {
      "V_LA",      "V_LV",      "V_RA",      "V_RV",      "p_AR_SYS",  "p_VEN_SYS",
      "p_AR_PUL",  "p_VEN_PUL", "Q_AR_SYS",  "Q_VEN_SYS", "Q_AR_PUL",  "Q_VEN_PUL"};
  return names;
}

CardioState cardio_default_initial_state() {
  CardioState x{};
  // The loop is closed, so this also fixes the total blood volume (about 2860 mL
  // at reference compliances).
  x[V_LA] = 65.0;
  x[V_LV] = 120.0;
  x[V_RA] = 65.0;
  x[V_RV] = 145.0;
  x[P_AR_SYS] = 80.0;
  x[P_VEN_SYS] = 30.5;
  x[P_AR_PUL] = 35.0;
  x[P_VEN_PUL] = 24.0;
  return x;
}

double valve_resistance(double dp, double r_min, double r_max) {
  const double expo = std::atan(-100.0 * std::numbers::pi * dp) / std::numbers::pi;
  return std::sqrt(r_max * r_min) * std::exp(expo * std::log(r_max / r_min));
}

double valve_flux(double dp, double r_min, double r_max) { return dp / valve_resistance(dp, r_min, r_max); }

double chamber_activation(double t, const ChamberParams& c, double period) {
  const double t_contract = c.tC * period;
  const double d_contract = c.TC * period;
  const double d_relax = c.TR * period;
  const double mc = positive_mod(t - t_contract, period);
  if (mc < d_contract) return 0.5 * (1.0 - std::cos(std::numbers::pi / d_contract * mc));
  // Both phases from one fmod: separate reductions can disagree at the window edge.
  const double mr = mc - d_contract;
  if (mr < d_relax) return 0.5 * (1.0 + std::cos(std::numbers::pi / d_relax * mr));
  return 0.0;
}

ChamberPressures chamber_pressures(double t, const CardioState& x, const CardioParams& p) {
  const double period = p.period();
  auto pressure = [&](const ChamberParams& c, double v) {
    return (c.EB + c.EA * chamber_activation(t, c, period)) * (v - c.V_U);
  };
  return {pressure(p.LA, x[V_LA]), pressure(p.LV, x[V_LV]), pressure(p.RA, x[V_RA]),
          pressure(p.RV, x[V_RV])};
}

ValveFluxes valve_fluxes(const CardioState& x, const ChamberPressures& pc, const CardioParams& p) {
  ValveFluxes q;
  q.MV = valve_flux(pc.LA - pc.LV, p.R_min, p.R_max);
  q.AV = valve_flux(pc.LV - x[P_AR_SYS], p.R_min, p.R_max);
  q.TV = valve_flux(pc.RA - pc.RV, p.R_min, p.R_max);
  q.PV = valve_flux(pc.RV - x[P_AR_PUL], p.R_min, p.R_max);
  q.VSD = p.vsd ? (pc.LV - pc.RV) / p.r_vsd_resistance() : 0.0;
  return q;
}

CardioState cardio_rhs(double t, const CardioState& x, const CardioParams& p) {
  const ChamberPressures pc = chamber_pressures(t, x, p);
  const ValveFluxes q = valve_fluxes(x, pc, p);
  CardioState dx;
  dx[V_LA] = x[Q_VEN_PUL] - q.MV;
  dx[V_LV] = q.MV - q.AV - q.VSD;
  dx[P_AR_SYS] = (q.AV - x[Q_AR_SYS]) / p.C_AR_SYS;
  dx[Q_AR_SYS] = (-p.R_AR_SYS * x[Q_AR_SYS] + x[P_AR_SYS] - x[P_VEN_SYS]) / p.L_AR_SYS;
  dx[P_VEN_SYS] = (x[Q_AR_SYS] - x[Q_VEN_SYS]) / p.C_VEN_SYS;
  dx[Q_VEN_SYS] = (-p.R_VEN_SYS * x[Q_VEN_SYS] + x[P_VEN_SYS] - pc.RA) / p.L_VEN_SYS;
  dx[V_RA] = x[Q_VEN_SYS] - q.TV;
  dx[V_RV] = q.TV - q.PV + q.VSD;
  dx[P_AR_PUL] = (q.PV - x[Q_AR_PUL]) / p.C_AR_PUL;
  dx[Q_AR_PUL] = (-p.R_AR_PUL * x[Q_AR_PUL] + x[P_AR_PUL] - x[P_VEN_PUL]) / p.L_AR_PUL;
  dx[P_VEN_PUL] = (x[Q_AR_PUL] - x[Q_VEN_PUL]) / p.C_VEN_PUL;
  dx[Q_VEN_PUL] = (-p.R_VEN_PUL * x[Q_VEN_PUL] + x[P_VEN_PUL] - pc.LA) / p.L_VEN_PUL;
  for (double v : dx) {
    if (!std::isfinite(v)) fail(ErrorKind::NonFiniteState, "cardio rhs produced a non-finite derivative");
  }
  return dx;
}

double cardio_blood_volume(const CardioState& x, const CardioParams& p) {
  return x[V_LA] + x[V_LV] + x[V_RA] + x[V_RV] + p.C_AR_SYS * x[P_AR_SYS] +
         p.C_VEN_SYS * x[P_VEN_SYS] + p.C_AR_PUL * x[P_AR_PUL] + p.C_VEN_PUL * x[P_VEN_PUL];
}

namespace {

void rk4_step(double t, double h, CardioState& x, const CardioParams& p) {
  CardioState tmp;
  const CardioState k1 = cardio_rhs(t, x, p);
  for (int i = 0; i < kCardioStates; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
  const CardioState k2 = cardio_rhs(t + 0.5 * h, tmp, p);
  for (int i = 0; i < kCardioStates; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
  const CardioState k3 = cardio_rhs(t + 0.5 * h, tmp, p);
  for (int i = 0; i < kCardioStates; ++i) tmp[i] = x[i] + h * k3[i];
  const CardioState k4 = cardio_rhs(t + h, tmp, p);
  for (int i = 0; i < kCardioStates; ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

void check_state(const CardioState& x) {
  for (double v : x) {
    if (!std::isfinite(v)) fail(ErrorKind::IntegratorBlowup, "cardio state became non-finite");
  }
  for (int i = V_LA; i <= V_RV; ++i) {
    if (!(x[i] > 0.0)) fail(ErrorKind::IntegratorBlowup, "cardio chamber volume became non-positive");
  }
  for (double v : x) {
    if (std::abs(v) > 1e6) fail(ErrorKind::IntegratorBlowup, "cardio state grew beyond 1e6");
  }
}

void record(CardioTrajectory& tr, Eigen::Index row, double t, const CardioState& x, const CardioParams& p) {
  tr.t[row] = t;
  for (int i = 0; i < kCardioStates; ++i) tr.states(row, i) = x[i];
  const ChamberPressures pc = chamber_pressures(t, x, p);
  const ValveFluxes q = valve_fluxes(x, pc, p);
  tr.pressures.row(row) << pc.LA, pc.LV, pc.RA, pc.RV;
  tr.fluxes.row(row) << q.MV, q.AV, q.TV, q.PV, q.VSD;
}

}  // namespace

CardioTrajectory cardio_simulate(const CardioParams& p, const CardioSimOptions& opt) {
  if (!(opt.dt > 0.0) || opt.beats < 1 || opt.samples_per_beat < 2)
    fail(ErrorKind::ConfigError, "cardio_simulate: invalid integration options");
  if (!(p.HR > 0.0)) fail(ErrorKind::ConfigError, "cardio_simulate: HR must be positive");
  const double period = p.period();
  const int n_out = opt.samples_per_beat;
  const double sample_dt = period / n_out;
  const int sub = std::max(1, static_cast<int>(std::ceil(sample_dt / opt.dt - 1e-9)));
  const double h = sample_dt / sub;

  CardioTrajectory tr;
  tr.dt_used = h;
  tr.hr = p.HR;
  tr.t.resize(n_out + 1);
  tr.states.resize(n_out + 1, kCardioStates);
  tr.pressures.resize(n_out + 1, 4);
  tr.fluxes.resize(n_out + 1, 5);

  CardioState x = opt.x0;
  const long steps_per_beat = static_cast<long>(n_out) * sub;
  for (int beat = 0; beat < opt.beats; ++beat) {
    const bool last = beat + 1 == opt.beats;
    const double t0 = beat * period;
    if (last) record(tr, 0, t0, x, p);
    for (long s = 0; s < steps_per_beat; ++s) {
      rk4_step(t0 + s * h, h, x, p);
      if (last && (s + 1) % sub == 0) record(tr, (s + 1) / sub, t0 + (s + 1) * h, x, p);
    }
    check_state(x);
  }

  double indicator = 0.0;
  for (int i = 0; i < kCardioStates; ++i) {
    const double scale = tr.states.col(i).cwiseAbs().maxCoeff();
    if (scale > 0.0) indicator = std::max(indicator, std::abs(tr.states(n_out, i) - tr.states(0, i)) / scale);
  }
  tr.periodicity = indicator;
  return tr;
}

const std::vector<std::string>& cardio_output_names() {
  static const std::vector<std::string> names = {
      "LA_I_Vmax", "LA_Pmax",  "LA_Pmin",  "LA_Pmean", "LV_SV",    "CI",       "LV_I_EDV",
      "LV_ESV",    "LV_EF",    "LV_Pmax",  "LV_Pmin",  "RA_Pmax",  "RA_Pmin",  "RA_Pmean",
      "RV_I_EDV",  "RV_I_ESV", "RV_EF",    "RV_Pmax",  "RV_Pmin",  "SAP_max",  "SAP_min",
      "PAP_max",   "PAP_min",  "PAP_mean", "PWP_min",  "PWP_mean", "SVR",      "PVR",
      // Not in the clinical table; used by the hypertension and VSD scenarios.
      "LV_I_ESV",  "Q_P",      "Q_S"};
  return names;
}

namespace {

int output_index(std::string_view name) {
  const auto& names = cardio_output_names();
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) fail(ErrorKind::ConfigError, "unknown cardio output '" + std::string(name) + "'");
  return static_cast<int>(it - names.begin());
}

}  // namespace

double CardioOutputs::get(std::string_view name) const { return values[output_index(name)]; }

OutputRange cardio_output_range(std::string_view name) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  static const std::unordered_map<std::string_view, OutputRange> table = {
      {"LA_I_Vmax", {16, 34, 33.1}}, {"LA_Pmax", {6, 20, 12.0}},   {"LA_Pmin", {-2, 9, 8.1}},
      {"LA_Pmean", {4, 12, 10.9}},   {"LV_SV", {30, 80, 67.6}},    {"CI", {2.8, 4.2, 2.8}},
      {"LV_I_EDV", {50, 90, 66.0}},  {"LV_ESV", {18, 52, 50.6}},   {"LV_EF", {53, 73, 57.2}},
      {"LV_Pmax", {90, 140, 113.2}}, {"LV_Pmin", {4, 12, 5.6}},    {"RA_Pmax", {2, 14, 8.4}},
      {"RA_Pmin", {-2, 6, 5.7}},     {"RA_Pmean", {-1, 8, 7.2}},   {"RV_I_EDV", {44, 80, 65.8}},
      {"RV_I_ESV", {19, 46, 28.1}},  {"RV_EF", {44, 71, 57.3}},    {"RV_Pmax", {15, 28, 27.4}},
      {"RV_Pmin", {0, 8, 3.9}},      {"SAP_max", {-inf, 140, 112.2}}, {"SAP_min", {-inf, 80, 62.0}},
      {"PAP_max", {15, 28, 25.8}},   {"PAP_min", {5, 16, 16.0}},   {"PAP_mean", {10, 22, 20.6}},
      {"PWP_min", {1, 12, 11.2}},    {"PWP_mean", {6, 15, 11.8}},  {"SVR", {11.3, 17.5, 15.7}},
      {"PVR", {1.9, 3.1, 1.9}},
  };
  auto it = table.find(name);
  if (it == table.end()) return {};
  return it->second;
}

CardioOutputs cardio_outputs(const CardioTrajectory& traj, double bsa) {
  const Eigen::Index n = traj.t.size();
  if (n < 2) fail(ErrorKind::EmptyTrajectory, "cardio_outputs: trajectory has fewer than two samples");
  if (!(bsa > 0.0)) fail(ErrorKind::ConfigError, "cardio_outputs: BSA must be positive");
  // The last sample repeats the first phase of the beat; means use the first n-1.
  const Eigen::Index m = n - 1;
  auto mx = [&](const Mat& a, int c) { return a.col(c).maxCoeff(); };
  auto mn = [&](const Mat& a, int c) { return a.col(c).minCoeff(); };
  auto mean = [&](const Mat& a, int c) { return a.col(c).head(m).mean(); };
  const Mat& s = traj.states;
  const Mat& pc = traj.pressures;
  const Mat& q = traj.fluxes;

  const double lv_edv = mx(s, V_LV), lv_esv = mn(s, V_LV);
  const double rv_edv = mx(s, V_RV), rv_esv = mn(s, V_RV);
  const double lv_sv = lv_edv - lv_esv;
  const double q_s = mean(q, 1);  // aortic valve, mL/s
  const double q_p = mean(q, 3);  // pulmonary valve
  const double co_s = q_s * 60.0 / 1000.0;
  const double co_p = q_p * 60.0 / 1000.0;
  const double pap_mean = mean(s, P_AR_PUL);
  const double pwp_mean = mean(s, P_VEN_PUL);
  const double la_mean = mean(pc, 0);

  CardioOutputs out;
  out.values.resize(static_cast<Eigen::Index>(cardio_output_names().size()));
  out.values << mx(s, V_LA) / bsa, mx(pc, 0), mn(pc, 0), la_mean, lv_sv,
      lv_sv * traj.hr / bsa / 1000.0, lv_edv / bsa, lv_esv, 100.0 * lv_sv / lv_edv, mx(pc, 1), mn(pc, 1),
      mx(pc, 2), mn(pc, 2), mean(pc, 2), rv_edv / bsa, rv_esv / bsa, 100.0 * (rv_edv - rv_esv) / rv_edv,
      mx(pc, 3), mn(pc, 3), mx(s, P_AR_SYS), mn(s, P_AR_SYS), mx(s, P_AR_PUL), mn(s, P_AR_PUL), pap_mean,
      mn(s, P_VEN_PUL), pwp_mean, (mean(s, P_AR_SYS) - mean(pc, 2)) / co_s, (pap_mean - la_mean) / co_p,
      lv_esv / bsa, q_p, q_s;
  return out;
}

CardioForward::CardioForward(CardioParams base, std::vector<std::string> param_names,
                             std::vector<std::string> output_names, CardioSimOptions opt, double bsa)
    : base_(std::move(base)), param_names_(std::move(param_names)), opt_(opt), bsa_(bsa) {
  for (const auto& n : param_names_) (void)base_.get(n);
  for (const auto& n : output_names) output_idx_.push_back(output_index(n));
  if (param_names_.empty() || output_idx_.empty())
    fail(ErrorKind::ConfigError, "cardio forward needs at least one parameter and one output");
}

CardioParams CardioForward::params_at(const Vec& log_u) const {
  require_dims(log_u.size() == param_dim(), "cardio forward: parameter length mismatch");
  CardioParams p = base_;
  for (std::size_t i = 0; i < param_names_.size(); ++i) p.set(param_names_[i], std::exp(log_u[static_cast<Eigen::Index>(i)]));
  return p;
}

Vec CardioForward::reference_log_params() const {
  Vec v(param_dim());
  for (std::size_t i = 0; i < param_names_.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = std::log(base_.get(param_names_[i]));
  return v;
}

std::vector<std::string> CardioForward::output_names() const {
  std::vector<std::string> names;
  for (int i : output_idx_) names.push_back(cardio_output_names()[i]);
  return names;
}

Vec CardioForward::eval_impl(const Vec& log_u) const {
  CardioOutputs all = cardio_outputs(cardio_simulate(params_at(log_u), opt_), bsa_);
  Vec y(obs_dim());
  for (std::size_t i = 0; i < output_idx_.size(); ++i) y[static_cast<Eigen::Index>(i)] = all.values[output_idx_[i]];
  return y;
}

std::vector<ParamRange> cardio_ranges_uniform(const std::vector<std::string>& names, double spread) {
  std::vector<ParamRange> r;
  for (const auto& n : names) r.push_back({n, 1.0 - spread, 1.0 + spread});
  return r;
}

std::vector<ParamRange> cardio_ranges_hypertension(const std::vector<std::string>& names) {
  // Extra widening of the lower (negative) or upper (positive) bound.
  static const std::unordered_map<std::string_view, double> mods = {
      {"EA_LV", 0.40},    {"V_U_LV", -0.10},   {"R_AR_SYS", 0.50},
      {"C_AR_SYS", -0.40}, {"R_VEN_SYS", 0.05}, {"C_VEN_SYS", -0.05},
      {"R_AR_PUL", 0.10}, {"C_AR_PUL", -0.10},  {"HR", 0.10}};
  std::vector<ParamRange> r = cardio_ranges_uniform(names, 0.25);
  for (auto& pr : r) {
    auto it = mods.find(pr.name);
    if (it == mods.end()) continue;
    if (it->second > 0) pr.high_factor += it->second;
    else pr.low_factor += it->second;
  }
  return r;
}

Vec log_uniform_prior_variance(const std::vector<ParamRange>& ranges) {
  Vec v(static_cast<Eigen::Index>(ranges.size()));
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    const double w = std::log(ranges[i].high_factor) - std::log(ranges[i].low_factor);
    v[static_cast<Eigen::Index>(i)] = w * w / 12.0;
  }
  return v;
}

}  // namespace uqvae
