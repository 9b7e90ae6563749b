#include "hjbt/config.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

#include "hjbt/errors.hpp"

namespace hjbt {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double to_double(const std::string& v, const std::string& key) {
    char* end = nullptr;
    errno = 0;
    const double d = std::strtod(v.c_str(), &end);
    if (v.empty() || *end != '\0' || errno == ERANGE) throw ConfigError("key '" + key + "': not a number: '" + v + "'");
    return d;
}

long long to_integer(const std::string& v, const std::string& key) {
    char* end = nullptr;
    errno = 0;
    const long long n = std::strtoll(v.c_str(), &end, 10);
    if (v.empty() || *end != '\0' || errno == ERANGE) throw ConfigError("key '" + key + "': not an integer: '" + v + "'");
    return n;
}

bool to_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + key + "': not a boolean: '" + v + "'");
}

struct Field {
    std::string name;  // section.key
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

#define HJBT_DOUBLE(sec, member, key)                                                                  \
    Field{key, [](ExperimentConfig& c, const std::string& v) { c.sec.member = to_double(v, key); }, \
          [](const ExperimentConfig& c) { return fmt_double(c.sec.member); }}
#define HJBT_INT(sec, member, key)                                                                            \
    Field{key,                                                                                                \
          [](ExperimentConfig& c, const std::string& v) {                                                    \
              c.sec.member = static_cast<decltype(c.sec.member)>(to_integer(v, key));                        \
          },                                                                                                  \
          [](const ExperimentConfig& c) { return std::to_string(c.sec.member); }}
#define HJBT_BOOL(sec, member, key)                                                                  \
    Field{key, [](ExperimentConfig& c, const std::string& v) { c.sec.member = to_bool(v, key); }, \
          [](const ExperimentConfig& c) { return std::string(c.sec.member ? "true" : "false"); }}
#define HJBT_STRING(sec, member, key)                                                    \
    Field{key, [](ExperimentConfig& c, const std::string& v) { c.sec.member = v; }, \
          [](const ExperimentConfig& c) { return c.sec.member; }}

const std::vector<Field>& fields() {
    static const std::vector<Field> f{
        HJBT_DOUBLE(problem, beta, "problem.beta"),
        HJBT_DOUBLE(problem, mu, "problem.mu"),
        HJBT_DOUBLE(problem, sbar, "problem.sbar"),
        HJBT_DOUBLE(problem, rho, "problem.rho"),
        HJBT_DOUBLE(problem, lambda_b, "problem.lambda_b"),
        HJBT_INT(problem, grid_points, "problem.grid_points"),
        HJBT_DOUBLE(problem, horizon, "problem.horizon"),

        HJBT_DOUBLE(control, gamma_lo, "control.gamma_lo"),
        HJBT_DOUBLE(control, gamma_hi, "control.gamma_hi"),
        HJBT_DOUBLE(control, lambda_lo, "control.lambda_lo"),
        HJBT_DOUBLE(control, lambda_hi, "control.lambda_hi"),
        HJBT_INT(control, n_a, "control.n_a"),
        HJBT_INT(control, n_alpha, "control.n_alpha"),
        HJBT_INT(control, segments, "control.segments"),
        HJBT_STRING(control, alpha_basis, "control.alpha_basis"),
        HJBT_INT(control, budget, "control.budget"),
        HJBT_BOOL(control, beam, "control.beam"),
        HJBT_INT(control, beam_width, "control.beam_width"),
        HJBT_DOUBLE(control, sim_a, "control.sim_a"),
        HJBT_DOUBLE(control, sim_alpha, "control.sim_alpha"),
        HJBT_DOUBLE(control, sim_switch_period, "control.sim_switch_period"),

        HJBT_STRING(cost, family, "cost.family"),
        HJBT_DOUBLE(cost, c_l, "cost.c_l"),
        HJBT_DOUBLE(cost, value, "cost.value"),
        HJBT_STRING(cost, l1_mode, "cost.l1_mode"),

        HJBT_DOUBLE(tol, sym_tol, "tolerances.sym_tol"),
        HJBT_DOUBLE(tol, clip_rel, "tolerances.clip_rel"),
        HJBT_DOUBLE(tol, renardy_tol, "tolerances.renardy_tol"),
        HJBT_DOUBLE(tol, adjoint_tol, "tolerances.adjoint_tol"),
        HJBT_DOUBLE(tol, domain_tol, "tolerances.domain_tol"),
        HJBT_DOUBLE(tol, cn_tol, "tolerances.cn_tol"),
        HJBT_DOUBLE(tol, dq_tol, "tolerances.dq_tol"),
        HJBT_DOUBLE(tol, lyapunov_tol, "tolerances.lyapunov_tol"),
        HJBT_DOUBLE(tol, gronwall_slack, "tolerances.gronwall_slack"),
        HJBT_DOUBLE(tol, gradient_slack, "tolerances.gradient_slack"),
        HJBT_DOUBLE(tol, vertex_tol, "tolerances.vertex_tol"),
        HJBT_DOUBLE(tol, concavity_tol, "tolerances.concavity_tol"),
        HJBT_DOUBLE(tol, stationarity_tol, "tolerances.stationarity_tol"),
        HJBT_DOUBLE(tol, step_min, "tolerances.step_min"),
        HJBT_INT(tol, d_slice, "tolerances.d_slice"),
        HJBT_INT(tol, max_evals, "tolerances.max_evals"),
        HJBT_DOUBLE(tol, lyapunov_window, "tolerances.lyapunov_window"),

        Field{"run.seed",
              [](ExperimentConfig& c, const std::string& v) {
                  const long long n = to_integer(v, "run.seed");
                  if (n < 0) throw ConfigError("key 'run.seed': must be >= 0");
                  c.run.seed = static_cast<unsigned long long>(n);
              },
              [](const ExperimentConfig& c) { return std::to_string(c.run.seed); }},
        HJBT_INT(run, workers, "run.workers"),
        Field{"run.n_list", [](ExperimentConfig& c, const std::string& v) { c.run.n_list = parse_int_list(v, "run.n_list"); },
              [](const ExperimentConfig& c) {
                  std::string s;
                  for (std::size_t i = 0; i < c.run.n_list.size(); ++i) s += (i ? "," : "") + std::to_string(c.run.n_list[i]);
                  return s;
              }},
        HJBT_INT(run, convergence_grid_points, "run.convergence_grid_points"),
        HJBT_BOOL(run, approx, "run.approx"),
        HJBT_BOOL(run, negative_control, "run.negative_control"),
        HJBT_INT(run, output_every, "run.output_every"),
        HJBT_INT(run, gronwall_instances, "run.gronwall_instances"),
        HJBT_INT(run, lipschitz_pairs, "run.lipschitz_pairs"),
        HJBT_INT(run, dpp_states, "run.dpp_states"),
        HJBT_INT(run, viscosity_seeds, "run.viscosity_seeds"),
    };
    return f;
}

#undef HJBT_DOUBLE
#undef HJBT_INT
#undef HJBT_BOOL
#undef HJBT_STRING

}  // namespace

std::vector<int> parse_int_list(const std::string& s, const std::string& key) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const long long n = to_integer(trim(item), key);
        if (n < 1) throw ConfigError("key '" + key + "': entries must be >= 1");
        out.push_back(static_cast<int>(n));
    }
    if (out.empty()) throw ConfigError("key '" + key + "': empty list");
    return out;
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            static const char* known[] = {"problem", "control", "cost", "tolerances", "run"};
            if (std::find(std::begin(known), std::end(known), section) == std::end(known))
                throw ConfigError("unknown section '" + section + "'");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": key outside any section");
        const std::string key = section + "." + trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto& fs = fields();
        const auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) { return f.name == key; });
        if (it == fs.end()) throw ConfigError("unknown key '" + key + "'");
        it->set(cfg, value);
    }
    validate(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void validate(const ExperimentConfig& cfg) {
    const ProblemSpec p = make_problem(cfg);
    int steps = 0;
    try {
        steps = p.steps(cfg.problem.horizon);
    } catch (const AlignmentError& e) {
        throw ConfigError(std::string("key 'problem.horizon': ") + e.what());
    }
    if (cfg.control.segments >= 1 && steps % cfg.control.segments != 0)
        throw ConfigError("key 'control.segments': " + std::to_string(steps) + " time steps do not split into " +
                          std::to_string(cfg.control.segments) + " equal segments");
    make_sets(cfg);
    alpha_basis_from_string(cfg.control.alpha_basis);
    l1_mode_from_string(cfg.cost.l1_mode);
    if (cfg.cost.family != "clipped_b_energy" && cfg.cost.family != "constant")
        throw ConfigError("key 'cost.family': unknown family '" + cfg.cost.family + "'");
    if (!(cfg.cost.c_l >= 0.0)) throw ConfigError("key 'cost.c_l': must be >= 0");
    if (cfg.control.n_a < 1 || cfg.control.n_alpha < 1) throw ConfigError("lattice sizes must be >= 1");
    if (cfg.control.segments < 1) throw ConfigError("key 'control.segments': must be >= 1");
    if (cfg.control.budget < 0) throw ConfigError("key 'control.budget': must be >= 0");
    if (cfg.control.beam_width < 1) throw ConfigError("key 'control.beam_width': must be >= 1");
    if (cfg.control.sim_switch_period < 0.0) throw ConfigError("key 'control.sim_switch_period': must be >= 0");
    if (cfg.tol.d_slice < 1 || cfg.tol.d_slice > cfg.problem.grid_points)
        throw ConfigError("key 'tolerances.d_slice': out of range");
    if (cfg.tol.max_evals < 0) throw ConfigError("key 'tolerances.max_evals': must be >= 0");
    if (cfg.run.workers < 1) throw ConfigError("key 'run.workers': must be >= 1");
    if (cfg.run.output_every < 1) throw ConfigError("key 'run.output_every': must be >= 1");
    if (cfg.run.convergence_grid_points < 2) throw ConfigError("key 'run.convergence_grid_points': must be >= 2");
    for (int v : {cfg.run.gronwall_instances, cfg.run.lipschitz_pairs, cfg.run.dpp_states, cfg.run.viscosity_seeds})
        if (v < 0) throw ConfigError("run counts must be >= 0");
}

std::string canonical_text(const ExperimentConfig& cfg) {
    std::string out;
    for (const Field& f : fields()) {
        if (f.name == "run.workers") continue;
        out += f.name + " = " + f.get(cfg) + "\n";
    }
    return out;
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string config_digest(const ExperimentConfig& cfg) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_text(cfg))));
    return buf;
}

ProblemSpec make_problem(const ExperimentConfig& cfg, int grid_points) {
    const auto& q = cfg.problem;
    return ProblemSpec::make(q.beta, q.mu, q.sbar, q.rho, q.lambda_b, grid_points > 0 ? grid_points : q.grid_points);
}

ControlSets make_sets(const ExperimentConfig& cfg) {
    const auto& c = cfg.control;
    return ControlSets::make(c.gamma_lo, c.gamma_hi, c.lambda_lo, c.lambda_hi);
}

BOptions make_b_options(const ExperimentConfig& cfg) { return {cfg.tol.sym_tol, cfg.tol.clip_rel}; }

Lattice make_lattice(const ExperimentConfig& cfg) { return {cfg.control.n_a, cfg.control.n_alpha, cfg.control.segments}; }

ValueOptions make_value_options(const ExperimentConfig& cfg) {
    ValueOptions o;
    o.alpha_basis = alpha_basis_from_string(cfg.control.alpha_basis);
    o.budget = cfg.control.budget;
    o.workers = cfg.run.workers;
    o.beam = cfg.control.beam;
    o.beam_width = cfg.control.beam_width;
    return o;
}

ViscosityOptions make_viscosity_options(const ExperimentConfig& cfg) {
    ViscosityOptions o;
    o.d_slice = cfg.tol.d_slice;
    o.step_min = cfg.tol.step_min;
    o.max_evals = cfg.tol.max_evals;
    o.stationarity_tol = cfg.tol.stationarity_tol;
    o.lyapunov_window = cfg.tol.lyapunov_window;
    o.workers = cfg.run.workers;
    return o;
}

RunningCost make_cost(const ExperimentConfig& cfg, std::shared_ptr<const BFactorization> bf) {
    if (cfg.cost.family == "constant") return constant_cost(cfg.cost.value);
    return clipped_b_energy_cost(std::move(bf), cfg.cost.c_l, l1_mode_from_string(cfg.cost.l1_mode));
}

}  // namespace hjbt
