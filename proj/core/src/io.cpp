#include "pbound/io.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pbound/error.hpp"

namespace pbound {

using nlohmann::json;

const char* to_string(ProblemKind kind) noexcept {
    return kind == ProblemKind::Skew ? "skew" : "integrator-chain";
}

namespace {

// Field access with path-qualified diagnostics. Config files report
// ErrorKind::Config, controller files ErrorKind::Parse.
struct Reader {
    ErrorKind kind;

    [[noreturn]] void fail(const std::string& path, const std::string& msg) const {
        throw Error(kind, path + ": " + msg);
    }

    const json& field(const json& obj, const std::string& key, const std::string& path) const {
        if (!obj.is_object() || !obj.contains(key)) {
            fail(path.empty() ? key : path + "." + key, "missing required field");
        }
        return obj.at(key);
    }

    double number(const json& j, const std::string& path) const {
        if (!j.is_number()) {
            fail(path, "expected a number");
        }
        const double v = j.get<double>();
        if (!std::isfinite(v)) {
            fail(path, "expected a finite number");
        }
        return v;
    }

    double positive(const json& j, const std::string& path) const {
        const double v = number(j, path);
        if (!(v > 0.0)) {
            fail(path, "must be positive");
        }
        return v;
    }

    long long integer(const json& j, const std::string& path) const {
        if (!j.is_number_integer()) {
            fail(path, "expected an integer");
        }
        return j.get<long long>();
    }

    std::string string(const json& j, const std::string& path) const {
        if (!j.is_string()) {
            fail(path, "expected a string");
        }
        return j.get<std::string>();
    }

    std::vector<double> vector(const json& j, const std::string& path, std::optional<std::size_t> len = {}) const {
        if (!j.is_array()) {
            fail(path, "expected an array of numbers");
        }
        if (len && j.size() != *len) {
            fail(path, "expected " + std::to_string(*len) + " entries, got " + std::to_string(j.size()));
        }
        std::vector<double> out;
        for (std::size_t i = 0; i < j.size(); ++i) {
            out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
        }
        return out;
    }

    Eigen::MatrixXd matrix(const json& j, const std::string& path, std::size_t n) const {
        if (!j.is_array() || j.size() != n) {
            fail(path, "expected " + std::to_string(n) + " rows");
        }
        Eigen::MatrixXd M(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (std::size_t r = 0; r < n; ++r) {
            const auto row = vector(j[r], path + "[" + std::to_string(r) + "]", n);
            for (std::size_t c = 0; c < n; ++c) {
                M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
            }
        }
        return M;
    }

    void only_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& path) const {
        if (!obj.is_object()) {
            fail(path.empty() ? "<root>" : path, "expected an object");
        }
        std::set<std::string> allowed(keys.begin(), keys.end());
        for (const auto& [k, _] : obj.items()) {
            if (!allowed.count(k)) {
                fail(path.empty() ? k : path + "." + k, "unknown field");
            }
        }
    }

    Saturation saturation(const json& j, const std::string& path) const {
        try {
            if (j.is_string()) {
                return preset(string(j, path), path);
            }
            if (j.is_object() && j.contains("preset")) {
                only_keys(j, {"preset"}, path);
                return preset(string(j.at("preset"), path + ".preset"), path + ".preset");
            }
            if (j.is_object() && j.contains("hermite")) {
                only_keys(j, {"hermite"}, path);
                const auto& h = j.at("hermite");
                const std::string hp = path + ".hermite";
                only_keys(h, {"p", "sigma_max", "L", "alpha"}, hp);
                return make_hermite_saturation(static_cast<int>(integer(field(h, "p", hp), hp + ".p")),
                                               positive(field(h, "sigma_max", hp), hp + ".sigma_max"),
                                               positive(field(h, "L", hp), hp + ".L"),
                                               positive(field(h, "alpha", hp), hp + ".alpha"));
            }
            only_keys(j, {"p", "sigma_max", "L", "S", "alpha", "pieces"}, path);
            const auto& pj = field(j, "pieces", path);
            if (!pj.is_array() || pj.empty()) {
                fail(path + ".pieces", "expected a non-empty array");
            }
            std::vector<SaturationPiece> pieces;
            for (std::size_t i = 0; i < pj.size(); ++i) {
                const std::string pp = path + ".pieces[" + std::to_string(i) + "]";
                only_keys(pj[i], {"lo", "hi", "origin", "coeffs"}, pp);
                SaturationPiece piece;
                piece.lo = number(field(pj[i], "lo", pp), pp + ".lo");
                if (pj[i].contains("hi") && !pj[i].at("hi").is_null()) {
                    piece.hi = number(pj[i].at("hi"), pp + ".hi");
                }
                if (pj[i].contains("origin")) {
                    piece.origin = number(pj[i].at("origin"), pp + ".origin");
                }
                piece.poly = Polynomial(vector(field(pj[i], "coeffs", pp), pp + ".coeffs"));
                pieces.push_back(std::move(piece));
            }
            return Saturation(static_cast<int>(integer(field(j, "p", path), path + ".p")),
                              positive(field(j, "sigma_max", path), path + ".sigma_max"),
                              positive(field(j, "L", path), path + ".L"), positive(field(j, "S", path), path + ".S"),
                              positive(field(j, "alpha", path), path + ".alpha"), std::move(pieces));
        } catch (const Error& e) {
            if (e.kind() == kind) {
                throw;
            }
            fail(path, e.what());
        }
    }

    Saturation preset(const std::string& name, const std::string& path) const {
        if (name == "two-quartic") {
            return make_two_quartic_saturation();
        }
        fail(path, "unknown saturation preset '" + name + "'");
    }
};

json saturation_json(const Saturation& s) {
    json pieces = json::array();
    for (const auto& piece : s.pieces()) {
        json pj;
        pj["lo"] = piece.lo;
        pj["hi"] = std::isfinite(piece.hi) ? json(piece.hi) : json(nullptr);
        pj["origin"] = piece.origin;
        pj["coeffs"] = piece.poly.coeffs();
        pieces.push_back(std::move(pj));
    }
    return json{{"p", s.order()},   {"sigma_max", s.sigma_max()}, {"L", s.L()},
                {"S", s.S()},       {"alpha", s.alpha()},         {"pieces", std::move(pieces)}};
}

json matrix_json(const Eigen::MatrixXd& M) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) {
            row.push_back(M(r, c));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

json vector_json(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

json parse_json(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Parse, std::string(what) + ": " + e.what());
    }
}

std::string read_file(const std::string& path, ErrorKind kind) {
    std::ifstream is(path);
    if (!is) {
        throw Error(kind, "cannot open " + path);
    }
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

ChainSpec ToolkitConfig::chain_spec() const {
    ChainSpec spec;
    spec.n = n;
    spec.p = p;
    spec.R = bounds;
    spec.sigmas = saturations;
    return spec;
}

ToolkitConfig parse_config(const std::string& json_text) {
    const json root = parse_json(json_text, "config");
    const Reader rd{ErrorKind::Config};
    rd.only_keys(root,
                 {"name", "problem", "n", "p", "bounds", "saturations", "mu_max", "lambda", "system", "certification",
                  "simulation", "initial_conditions", "random"},
                 "");
    ToolkitConfig cfg;
    if (root.contains("name")) {
        cfg.name = rd.string(root.at("name"), "name");
    }
    const std::string problem = rd.string(rd.field(root, "problem", ""), "problem");
    if (problem == "integrator-chain") {
        cfg.problem = ProblemKind::IntegratorChain;
    } else if (problem == "skew") {
        cfg.problem = ProblemKind::Skew;
    } else {
        rd.fail("problem", "expected 'integrator-chain' or 'skew'");
    }
    const long long n = rd.integer(rd.field(root, "n", ""), "n");
    const long long p = rd.integer(rd.field(root, "p", ""), "p");
    if (n < 1 || n > 50) {
        rd.fail("n", "must be in 1..50");
    }
    if (p < 0 || p > 8) {
        rd.fail("p", "must be in 0..8");
    }
    cfg.n = static_cast<int>(n);
    cfg.p = static_cast<int>(p);
    const auto un = static_cast<std::size_t>(n);
    const auto& bj = rd.field(root, "bounds", "");
    cfg.bounds = rd.vector(bj, "bounds", static_cast<std::size_t>(p) + 1);
    for (std::size_t j = 0; j < cfg.bounds.size(); ++j) {
        if (!(cfg.bounds[j] > 0.0)) {
            rd.fail("bounds[" + std::to_string(j) + "]", "must be positive");
        }
    }

    if (cfg.problem == ProblemKind::IntegratorChain) {
        for (const char* k : {"system", "certification"}) {
            if (root.contains(k)) {
                rd.fail(k, "only valid for problem 'skew'");
            }
        }
        const auto& sj = rd.field(root, "saturations", "");
        if (!sj.is_array() || (sj.size() != 1 && sj.size() != un)) {
            rd.fail("saturations", "expected an array of 1 or n entries");
        }
        for (std::size_t i = 0; i < un; ++i) {
            const std::size_t src = sj.size() == 1 ? 0 : i;
            const std::string path = "saturations[" + std::to_string(src) + "]";
            Saturation s = rd.saturation(sj[src], path);
            if (s.order() < cfg.p) {
                rd.fail(path, "saturation order " + std::to_string(s.order()) + " is below p");
            }
            const auto rep = check_membership(s);
            if (!rep.ok()) {
                rd.fail(path, "not a valid saturation: " + rep.detail);
            }
            cfg.saturations.push_back(std::move(s));
        }
        if (root.contains("mu_max")) {
            cfg.mu_max = rd.vector(root.at("mu_max"), "mu_max", un - 1);
        }
        if (root.contains("lambda")) {
            cfg.lambda = rd.number(root.at("lambda"), "lambda");
            if (!(*cfg.lambda >= 1.0)) {
                rd.fail("lambda", "must be at least 1");
            }
        }
    } else {
        for (const char* k : {"saturations", "mu_max", "lambda"}) {
            if (root.contains(k)) {
                rd.fail(k, "only valid for problem 'integrator-chain'");
            }
        }
        const auto& sys = rd.field(root, "system", "");
        rd.only_keys(sys, {"A", "b", "alpha", "beta"}, "system");
        const Eigen::MatrixXd A = rd.matrix(rd.field(sys, "A", "system"), "system.A", un);
        const auto bv = rd.vector(rd.field(sys, "b", "system"), "system.b", un);
        const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(bv.data(), static_cast<Eigen::Index>(un));
        const double alpha = sys.contains("alpha") ? rd.number(sys.at("alpha"), "system.alpha") : 0.5;
        try {
            cfg.system = validate_system(A, b, alpha, cfg.p, cfg.bounds);
        } catch (const Error& e) {
            rd.fail("system", e.what());
        }
        if (sys.contains("beta")) {
            cfg.beta = rd.positive(sys.at("beta"), "system.beta");
        }
        if (root.contains("certification")) {
            const auto& c = root.at("certification");
            rd.only_keys(c, {"margin", "samples", "refine", "r_min", "r_max", "max_halvings", "seed", "threads"},
                         "certification");
            auto& o = cfg.certification;
            if (c.contains("margin")) o.margin = rd.number(c.at("margin"), "certification.margin");
            if (c.contains("samples")) o.samples = static_cast<std::size_t>(rd.integer(c.at("samples"), "certification.samples"));
            if (c.contains("refine")) o.refine = static_cast<std::size_t>(rd.integer(c.at("refine"), "certification.refine"));
            if (c.contains("r_min")) o.r_min = rd.positive(c.at("r_min"), "certification.r_min");
            if (c.contains("r_max")) o.r_max = rd.positive(c.at("r_max"), "certification.r_max");
            if (c.contains("max_halvings")) o.max_halvings = static_cast<int>(rd.integer(c.at("max_halvings"), "certification.max_halvings"));
            if (c.contains("seed")) o.seed = static_cast<std::uint64_t>(rd.integer(c.at("seed"), "certification.seed"));
            if (c.contains("threads")) o.threads = static_cast<unsigned>(rd.integer(c.at("threads"), "certification.threads"));
            if (!(o.margin >= 0.0 && o.margin < 1.0)) rd.fail("certification.margin", "must be in [0, 1)");
            if (o.samples < 1) rd.fail("certification.samples", "must be positive");
            if (!(o.r_max > o.r_min)) rd.fail("certification.r_max", "must exceed r_min");
        }
    }

    if (root.contains("simulation")) {
        const auto& s = root.at("simulation");
        rd.only_keys(s, {"dt", "t_max", "eps"}, "simulation");
        if (s.contains("dt")) cfg.simulation.dt = rd.positive(s.at("dt"), "simulation.dt");
        if (s.contains("t_max")) cfg.simulation.t_max = rd.positive(s.at("t_max"), "simulation.t_max");
        if (s.contains("eps")) cfg.simulation.eps = rd.positive(s.at("eps"), "simulation.eps");
        if (cfg.simulation.t_max < cfg.simulation.dt) {
            rd.fail("simulation.t_max", "must be at least dt");
        }
    }
    if (root.contains("initial_conditions")) {
        const auto& ic = root.at("initial_conditions");
        if (!ic.is_array()) {
            rd.fail("initial_conditions", "expected an array of states");
        }
        for (std::size_t i = 0; i < ic.size(); ++i) {
            cfg.initial_conditions.push_back(rd.vector(ic[i], "initial_conditions[" + std::to_string(i) + "]", un));
        }
    }
    if (root.contains("random")) {
        const auto& r = root.at("random");
        rd.only_keys(r, {"seed", "count", "radius"}, "random");
        RandomInitialConditions ric;
        if (r.contains("seed")) ric.seed = static_cast<std::uint64_t>(rd.integer(r.at("seed"), "random.seed"));
        if (r.contains("count")) {
            const long long c = rd.integer(r.at("count"), "random.count");
            if (c < 0) rd.fail("random.count", "must be non-negative");
            ric.count = static_cast<std::size_t>(c);
        }
        if (r.contains("radius")) ric.radius = rd.positive(r.at("radius"), "random.radius");
        cfg.random = ric;
    }
    return cfg;
}

ToolkitConfig load_config(const std::string& path) {
    return parse_config(read_file(path, ErrorKind::Config));
}

std::string config_to_json(const ToolkitConfig& cfg) {
    json root;
    if (!cfg.name.empty()) {
        root["name"] = cfg.name;
    }
    root["problem"] = to_string(cfg.problem);
    root["n"] = cfg.n;
    root["p"] = cfg.p;
    root["bounds"] = cfg.bounds;
    if (cfg.problem == ProblemKind::IntegratorChain) {
        json sats = json::array();
        for (const auto& s : cfg.saturations) {
            sats.push_back(saturation_json(s));
        }
        root["saturations"] = std::move(sats);
        if (cfg.mu_max) root["mu_max"] = *cfg.mu_max;
        if (cfg.lambda) root["lambda"] = *cfg.lambda;
    } else if (cfg.system) {
        json sys{{"A", matrix_json(cfg.system->A)}, {"b", vector_json(cfg.system->b)}, {"alpha", cfg.system->alpha}};
        if (cfg.beta) sys["beta"] = *cfg.beta;
        root["system"] = std::move(sys);
        const auto& o = cfg.certification;
        root["certification"] = json{{"margin", o.margin}, {"samples", o.samples}, {"refine", o.refine},
                                     {"r_min", o.r_min},   {"r_max", o.r_max},     {"max_halvings", o.max_halvings},
                                     {"seed", o.seed}};
    }
    root["simulation"] = json{{"dt", cfg.simulation.dt}, {"t_max", cfg.simulation.t_max}, {"eps", cfg.simulation.eps}};
    if (!cfg.initial_conditions.empty()) root["initial_conditions"] = cfg.initial_conditions;
    if (cfg.random) {
        root["random"] = json{{"seed", cfg.random->seed}, {"count", cfg.random->count}, {"radius", cfg.random->radius}};
    }
    return root.dump(2) + "\n";
}

std::vector<std::vector<double>> initial_states(const ToolkitConfig& cfg) {
    auto out = cfg.initial_conditions;
    if (cfg.random) {
        std::mt19937_64 rng(cfg.random->seed);
        std::uniform_real_distribution<double> dist(-cfg.random->radius, cfg.random->radius);
        for (std::size_t k = 0; k < cfg.random->count; ++k) {
            std::vector<double> x(static_cast<std::size_t>(cfg.n));
            for (auto& v : x) {
                v = dist(rng);
            }
            out.push_back(std::move(x));
        }
    }
    return out;
}

AnyController synthesize_from_config(const ToolkitConfig& cfg) {
    if (cfg.problem == ProblemKind::IntegratorChain) {
        SynthesisOptions opts;
        opts.mu_max = cfg.mu_max;
        opts.lambda = cfg.lambda;
        return synthesize(cfg.chain_spec(), opts);
    }
    if (!cfg.system) {
        throw Error(ErrorKind::Config, "system: missing");
    }
    if (cfg.beta) {
        const BetaCheck chk = check_beta(*cfg.system, *cfg.beta, cfg.certification);
        if (!chk.ok) {
            std::ostringstream os;
            os << "beta = " << *cfg.beta << " fails certification at order " << chk.worst_order << " (ratio "
               << chk.worst_ratio << ")";
            throw Error(ErrorKind::Certification, os.str());
        }
        return make_skew_controller(*cfg.system, *cfg.beta);
    }
    return certify_beta(*cfg.system, cfg.certification);
}

std::string serialize_controller(const AnyController& any) {
    json root;
    root["format"] = "pbound-controller";
    root["version"] = 1;
    if (const auto* c = std::get_if<NestedSatController>(&any)) {
        const ChainSpec& spec = c->spec();
        root["kind"] = "integrator-chain";
        root["n"] = spec.n;
        root["p"] = spec.p;
        root["bounds"] = spec.R;
        json sats = json::array();
        for (const auto& s : spec.sigmas) {
            sats.push_back(saturation_json(s));
        }
        root["saturations"] = std::move(sats);
        root["mu_max"] = c->inner().mu_max;
        root["lambda"] = c->lambda();
        // derived quantities, informational only
        root["alpha_tilde"] = c->alpha_tilde();
        root["L_mu"] = c->inner().L_mu;
        root["H"] = matrix_json(c->H());
        json ks = json::array();
        for (const auto& k : c->k()) {
            ks.push_back(vector_json(k));
        }
        root["k"] = std::move(ks);
        root["a"] = c->a();
    } else {
        const auto& s = std::get<SkewController>(any);
        root["kind"] = "skew";
        root["n"] = s.system.n();
        root["p"] = s.system.p;
        root["bounds"] = s.system.R;
        root["A"] = matrix_json(s.system.A);
        root["b"] = vector_json(s.system.b);
        root["alpha"] = s.system.alpha;
        root["beta"] = s.beta;
        root["P"] = matrix_json(s.P);
        root["K"] = s.K;
    }
    return root.dump(2) + "\n";
}

AnyController deserialize_controller(const std::string& text) {
    const json root = parse_json(text, "controller");
    const Reader rd{ErrorKind::Parse};
    if (!root.is_object() || root.value("format", "") != "pbound-controller") {
        rd.fail("format", "not a controller file");
    }
    const std::string kind = rd.string(rd.field(root, "kind", ""), "kind");
    const long long n = rd.integer(rd.field(root, "n", ""), "n");
    const long long p = rd.integer(rd.field(root, "p", ""), "p");
    if (n < 1 || p < 0) {
        rd.fail("n", "invalid dimensions");
    }
    const auto un = static_cast<std::size_t>(n);
    std::vector<double> bounds = rd.vector(rd.field(root, "bounds", ""), "bounds", static_cast<std::size_t>(p) + 1);
    try {
        if (kind == "integrator-chain") {
            ChainSpec spec;
            spec.n = static_cast<int>(n);
            spec.p = static_cast<int>(p);
            spec.R = std::move(bounds);
            const auto& sj = rd.field(root, "saturations", "");
            if (!sj.is_array() || sj.size() != un) {
                rd.fail("saturations", "expected n entries");
            }
            for (std::size_t i = 0; i < un; ++i) {
                spec.sigmas.push_back(rd.saturation(sj[i], "saturations[" + std::to_string(i) + "]"));
            }
            spec.validate();
            const auto mu_max = rd.vector(rd.field(root, "mu_max", ""), "mu_max", un - 1);
            const double lambda = rd.number(rd.field(root, "lambda", ""), "lambda");
            MuFamily mu = choose_mu_families(spec, mu_max);
            return NestedSatController(std::move(spec), std::move(mu), lambda);
        }
        if (kind == "skew") {
            const Eigen::MatrixXd A = rd.matrix(rd.field(root, "A", ""), "A", un);
            const auto bv = rd.vector(rd.field(root, "b", ""), "b", un);
            const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(bv.data(), static_cast<Eigen::Index>(un));
            const double alpha = rd.number(rd.field(root, "alpha", ""), "alpha");
            const double beta = rd.positive(rd.field(root, "beta", ""), "beta");
            const SkewSystem sys = validate_system(A, b, alpha, static_cast<int>(p), std::move(bounds));
            return make_skew_controller(sys, beta);
        }
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Parse) {
            throw;
        }
        rd.fail("controller", e.what());
    }
    rd.fail("kind", "expected 'integrator-chain' or 'skew'");
}

void save_controller(const AnyController& ctrl, const std::string& path) {
    std::ofstream os(path);
    if (!os) {
        throw ArgumentError("save_controller: cannot open " + path);
    }
    os << serialize_controller(ctrl);
}

AnyController load_controller(const std::string& path) {
    return deserialize_controller(read_file(path, ErrorKind::Parse));
}

double eval_feedback(const AnyController& ctrl, std::span<const double> x) {
    if (const auto* c = std::get_if<NestedSatController>(&ctrl)) {
        return eval_nested_feedback(*c, x);
    }
    return eval_skew_feedback(std::get<SkewController>(ctrl), x);
}

std::vector<double> u_derivatives(const AnyController& ctrl, std::span<const double> x, int up_to) {
    if (const auto* c = std::get_if<NestedSatController>(&ctrl)) {
        return chain_u_derivatives(*c, x, up_to);
    }
    const auto& s = std::get<SkewController>(ctrl);
    return skew_u_derivatives(s.system, s.beta, x, up_to);
}

int state_dim(const AnyController& ctrl) {
    if (const auto* c = std::get_if<NestedSatController>(&ctrl)) {
        return c->n();
    }
    return std::get<SkewController>(ctrl).system.n();
}

int derivative_order(const AnyController& ctrl) {
    if (const auto* c = std::get_if<NestedSatController>(&ctrl)) {
        return c->p();
    }
    return std::get<SkewController>(ctrl).system.p;
}

const std::vector<double>& bounds_of(const AnyController& ctrl) {
    if (const auto* c = std::get_if<NestedSatController>(&ctrl)) {
        return c->spec().R;
    }
    return std::get<SkewController>(ctrl).system.R;
}

}  // namespace pbound
