#include "frsde/config.hpp"

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace frsde {

namespace {

constexpr std::array kKinds = {ExperimentKind::Check,   ExperimentKind::Eig,    ExperimentKind::Simulate,
                               ExperimentKind::Moments, ExperimentKind::Aldous, ExperimentKind::Converge};

template <typename Enum, std::size_t N>
std::optional<Enum> enum_from(const std::string& name, const std::array<Enum, N>& all)
{
    for (Enum e : all)
        if (to_string(e) == name)
            return e;
    return std::nullopt;
}

template <typename Enum, std::size_t N>
std::string choices(const std::array<Enum, N>& all)
{
    std::string out;
    for (Enum e : all)
        out += (out.empty() ? "" : ", ") + to_string(e);
    return out;
}

// Strict reader over one TOML table: every key must be consumed.
class Reader {
public:
    Reader(const toml::table* table, std::string path, std::vector<std::string>& errors)
        : table_(table), path_(std::move(path)), errors_(errors)
    {
    }

    ~Reader()
    {
        if (!table_)
            return;
        for (const auto& [key, node] : *table_)
            if (!used_.count(std::string(key.str())))
                errors_.push_back("unknown key '" + name(std::string(key.str())) + "'");
    }

    Reader(const Reader&) = delete;
    Reader& operator=(const Reader&) = delete;

    const toml::node* take(const std::string& key)
    {
        used_.insert(key);
        return table_ ? table_->get(key) : nullptr;
    }

    bool has(const std::string& key) const { return table_ && table_->contains(key); }

    Reader section(const std::string& key)
    {
        const toml::node* node = take(key);
        if (node && !node->is_table()) {
            fail(key, "expected a table");
            node = nullptr;
        }
        return Reader(node ? node->as_table() : nullptr, name(key), errors_);
    }

    void number(const std::string& key, double& out)
    {
        if (const toml::node* n = take(key))
            if (!as_number(*n, out))
                fail(key, "expected a number");
    }

    void integer(const std::string& key, int& out)
    {
        std::int64_t v = 0;
        if (int_value(key, v)) {
            if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
                fail(key, "integer out of range");
            else
                out = static_cast<int>(v);
        }
    }

    void count(const std::string& key, std::size_t& out)
    {
        std::int64_t v = 0;
        if (int_value(key, v)) {
            if (v < 0)
                fail(key, "expected a nonnegative integer");
            else
                out = static_cast<std::size_t>(v);
        }
    }

    void seed(const std::string& key, std::uint64_t& out)
    {
        std::int64_t v = 0;
        if (int_value(key, v)) {
            if (v < 0)
                fail(key, "expected a nonnegative integer");
            else
                out = static_cast<std::uint64_t>(v);
        }
    }

    void text(const std::string& key, std::string& out)
    {
        if (const toml::node* n = take(key)) {
            if (auto s = n->value<std::string>())
                out = *s;
            else
                fail(key, "expected a string");
        }
    }

    void numbers(const std::string& key, std::vector<double>& out)
    {
        if (const toml::node* n = take(key))
            if (!as_numbers(*n, out))
                fail(key, "expected an array of numbers");
    }

    void integers(const std::string& key, std::vector<int>& out)
    {
        const toml::node* n = take(key);
        if (!n)
            return;
        const toml::array* arr = n->as_array();
        std::vector<int> v;
        bool ok = arr != nullptr;
        if (arr)
            for (const auto& e : *arr) {
                auto i = e.value_exact<std::int64_t>();
                if (!i || *i < std::numeric_limits<int>::min() || *i > std::numeric_limits<int>::max()) {
                    ok = false;
                    break;
                }
                v.push_back(static_cast<int>(*i));
            }
        if (ok)
            out = std::move(v);
        else
            fail(key, "expected an array of integers");
    }

    template <typename Enum, std::size_t N>
    void choice(const std::string& key, Enum& out, const std::array<Enum, N>& all)
    {
        std::string s;
        const bool present = has(key);
        text(key, s);
        if (!present || s.empty())
            return;
        if (auto e = enum_from(s, all))
            out = *e;
        else
            fail(key, "unknown value '" + s + "' (expected one of " + choices(all) + ")");
    }

    /// A number, or a table {x = [...], v = [...]}.
    void profile(const std::string& key, Profile& out)
    {
        const toml::node* n = take(key);
        if (!n)
            return;
        double c = 0.0;
        if (as_number(*n, c)) {
            out = Profile::uniform(c);
            return;
        }
        if (n->is_table()) {
            Reader sub(n->as_table(), name(key), errors_);
            Profile p;
            sub.numbers("x", p.table_x);
            sub.numbers("v", p.table_v);
            if (p.table_x.empty())
                fail(key, "profile table needs nonempty x and v");
            out = std::move(p);
            return;
        }
        fail(key, "expected a number or a table {x, v}");
    }

    /// A table {scale, decay} for v_i = scale i^-decay, or an explicit array.
    void sequence(const std::string& key, Sequence& out)
    {
        const toml::node* n = take(key);
        if (!n)
            return;
        std::vector<double> values;
        if (as_numbers(*n, values)) {
            if (values.empty())
                fail(key, "explicit sequence must be nonempty");
            out = Sequence::list(std::move(values));
            return;
        }
        if (n->is_table()) {
            Reader sub(n->as_table(), name(key), errors_);
            Sequence s = Sequence::power(0.0, 2.0);
            sub.number("scale", s.scale);
            sub.number("decay", s.decay);
            out = s;
            return;
        }
        fail(key, "expected a table {scale, decay} or an array of numbers");
    }

    /// A table {u = [...], y = [...]}.
    void table1d(const std::string& key, Table1D& out)
    {
        const toml::node* n = take(key);
        if (!n)
            return;
        if (!n->is_table()) {
            fail(key, "expected a table {u, y}");
            return;
        }
        Reader sub(n->as_table(), name(key), errors_);
        sub.numbers("u", out.u);
        sub.numbers("y", out.y);
    }

    void fail(const std::string& key, const std::string& what) { errors_.push_back(name(key) + ": " + what); }

    std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    static bool as_number(const toml::node& n, double& out)
    {
        if (auto d = n.value_exact<double>()) {
            out = *d;
            return true;
        }
        if (auto i = n.value_exact<std::int64_t>()) {
            out = static_cast<double>(*i);
            return true;
        }
        return false;
    }

    static bool as_numbers(const toml::node& n, std::vector<double>& out)
    {
        const toml::array* arr = n.as_array();
        if (!arr)
            return false;
        std::vector<double> v;
        for (const auto& e : *arr) {
            double d = 0.0;
            if (!as_number(e, d))
                return false;
            v.push_back(d);
        }
        out = std::move(v);
        return true;
    }

    bool int_value(const std::string& key, std::int64_t& out)
    {
        const toml::node* n = take(key);
        if (!n)
            return false;
        if (auto i = n->value_exact<std::int64_t>()) {
            out = *i;
            return true;
        }
        fail(key, "expected an integer");
        return false;
    }

    const toml::table* table_;
    std::string path_;
    std::vector<std::string>& errors_;
    std::set<std::string> used_;
};

constexpr std::array kOperatorModes = {OperatorMode::IntegralFEM, OperatorMode::SpectralPower};
constexpr std::array kDriftFamilies = {DriftFamily::PowerDecay, DriftFamily::UserTabulated};
constexpr std::array kPerturbationFamilies = {PerturbationFamily::Linear, PerturbationFamily::BoundedSine};
constexpr std::array kSigma1Shapes = {Sigma1Shape::Sine, Sigma1Shape::Constant, Sigma1Shape::Eigenmode};
constexpr std::array kSigma2Families = {Sigma2Family::PowerHalfQ, Sigma2Family::UserTabulated};
constexpr std::array kSchemes = {Scheme::TamedEuler, Scheme::ExponentialTamed};

void read_model(Reader& root, ExperimentConfig& cfg)
{
    {
        Reader s = root.section("space");
        s.number("a", cfg.space.a);
        s.number("b", cfg.space.b);
        s.integer("nodes", cfg.space.nodes);
        s.number("s", cfg.space.s);
        s.choice("operator", cfg.operator_mode, kOperatorModes);
    }
    {
        Reader d = root.section("drift");
        d.choice("family", cfg.drift.family, kDriftFamilies);
        d.number("p", cfg.drift.p);
        d.number("delta1", cfg.drift.delta1);
        d.number("delta2", cfg.drift.delta2);
        d.number("delta3", cfg.drift.delta3);
        d.profile("phi1", cfg.drift.phi1);
        d.profile("phi2", cfg.drift.phi2);
        d.profile("phi4", cfg.drift.phi4);
        d.table1d("table", cfg.drift.table);
    }
    cfg.space.p = cfg.drift.p;
    {
        Reader h = root.section("perturbation");
        h.choice("family", cfg.perturbation.family, kPerturbationFamilies);
        h.number("kappa", cfg.perturbation.kappa);
        h.profile("phi3", cfg.perturbation.phi3);
    }
    {
        Reader n = root.section("noise");
        n.integer("m", cfg.noise.m);
        n.number("q", cfg.noise.q);
        n.sequence("sigma1", cfg.noise.sigma1);
        n.choice("sigma1_shape", cfg.noise.sigma1_shape, kSigma1Shapes);
        n.sequence("beta", cfg.noise.beta);
        n.sequence("gamma", cfg.noise.gamma);
        n.numbers("alpha", cfg.noise.alpha);
        n.choice("sigma2", cfg.noise.sigma2_family, kSigma2Families);
        n.table1d("psi_table", cfg.noise.psi_table);
    }
    {
        Reader s = root.section("scheme");
        s.choice("name", cfg.scheme.scheme, kSchemes);
        s.number("dt", cfg.scheme.dt);
        s.number("T", cfg.scheme.T);
        s.number("stability_guard", cfg.scheme.stability_guard);
        if (const toml::node* n = s.take("tame_diffusion")) {
            if (auto b = n->value_exact<bool>())
                cfg.scheme.tame_diffusion = *b;
            else if (auto t = n->value_exact<std::string>(); t && *t == "auto")
                cfg.scheme.tame_diffusion.reset();
            else
                s.fail("tame_diffusion", "expected true, false or \"auto\"");
        }
    }
    {
        Reader i = root.section("initial");
        i.numbers("coefficients", cfg.initial);
    }
}

void read_kind(Reader& root, ExperimentConfig& cfg)
{
    {
        Reader c = root.section("check");
        c.integer("n_modes", cfg.check.n_modes);
        c.number("u_max", cfg.check.grid.u_max);
        c.integer("n_u", cfg.check.grid.n_u);
        c.integer("n_pair", cfg.check.grid.n_pair);
        c.numbers("t", cfg.check.grid.t);
        c.numbers("x", cfg.check.grid.x);
        c.integer("n_states", cfg.check.sampling.n_states);
        c.number("scale_min", cfg.check.sampling.scale_min);
        c.number("scale_max", cfg.check.sampling.scale_max);
        c.number("state_decay", cfg.check.sampling.decay);
        std::uint64_t seed = cfg.check.sampling.seed;
        c.seed("seed", seed);
        cfg.check.sampling.seed = seed;
        cfg.check.sampling.t = cfg.check.grid.t;
    }
    {
        Reader e = root.section("eig");
        e.integer("count", cfg.eig.count);
    }
    {
        Reader s = root.section("simulate");
        s.integer("n_modes", cfg.simulate.n_modes);
        s.seed("path_index", cfg.simulate.path_index);
    }
    {
        Reader m = root.section("moments");
        m.integers("levels", cfg.moments.levels);
        m.numbers("p_exp", cfg.moments.p_exp);
        m.numbers("x_norms", cfg.moments.x_norms);
        m.count("paths", cfg.moments.paths);
        m.number("factor", cfg.moments.factor);
        m.number("confidence", cfg.moments.confidence);
    }
    {
        Reader a = root.section("aldous");
        a.integer("n_modes", cfg.aldous.n_modes);
        a.count("paths", cfg.aldous.paths);
        a.numbers("delta", cfg.aldous.delta);
        a.numbers("theta", cfg.aldous.theta);
        a.numbers("test_function", cfg.aldous.test_function);
        a.number("noise_fraction", cfg.aldous.noise_fraction);
        a.number("excursion_quantile", cfg.aldous.excursion_quantile);
        a.number("excursion_factor", cfg.aldous.excursion_factor);
    }
    {
        Reader c = root.section("converge");
        c.integers("levels", cfg.converge.levels);
        c.count("paths", cfg.converge.paths);
        c.number("confidence", cfg.converge.confidence);
    }
}

void append(std::vector<std::string>& to, const std::vector<std::string>& from)
{
    for (const auto& e : from)
        if (std::find(to.begin(), to.end(), e) == to.end())
            to.push_back(e);
}

void check_levels(const std::string& name, const std::vector<int>& levels, int available, bool strict,
                  std::vector<std::string>& errors)
{
    if (levels.size() < 3)
        errors.push_back(name + ".levels: at least 3 levels required");
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (levels[i] < 1 || levels[i] > available) {
            errors.push_back(name + ".levels: each level must lie in [1, " + std::to_string(available) + "]");
            break;
        }
        if (i > 0 && (strict ? levels[i] <= levels[i - 1] : levels[i] < levels[i - 1])) {
            errors.push_back(name + ".levels: levels must be increasing");
            break;
        }
    }
}

void check_modes(const std::string& name, int n_modes, int available, std::vector<std::string>& errors)
{
    if (n_modes < 1 || n_modes > available)
        errors.push_back(name + ".n_modes: must lie in [1, " + std::to_string(available) + "]");
}

void check_paths(const std::string& name, std::size_t paths, std::vector<std::string>& errors)
{
    if (paths < 2)
        errors.push_back(name + ".paths: at least 2 paths required");
}

void check_confidence(const std::string& key, double c, std::vector<std::string>& errors)
{
    if (!(c > 0.0 && c < 1.0))
        errors.push_back(key + ": must lie in (0, 1)");
}

nlohmann::json profile_json(const Profile& p)
{
    if (!p.tabulated())
        return p.constant;
    return {{"x", p.table_x}, {"v", p.table_v}};
}

nlohmann::json sequence_json(const Sequence& s)
{
    if (s.is_explicit())
        return s.values;
    return {{"scale", s.scale}, {"decay", s.decay}};
}

nlohmann::json table_json(const Table1D& t)
{
    return {{"u", t.u}, {"y", t.y}};
}

nlohmann::json doubles(const std::vector<double>& v)
{
    nlohmann::json arr = nlohmann::json::array();
    for (double d : v)
        arr.push_back(d);
    return arr;
}

void insert_json(toml::table& tbl, const std::string& key, const nlohmann::json& value);

// JSON numbers keep their integer/float distinction, which TOML needs.
toml::array json_array(const nlohmann::json& arr)
{
    toml::array out;
    for (const auto& e : arr) {
        if (e.is_number_integer())
            out.push_back(e.get<std::int64_t>());
        else if (e.is_number())
            out.push_back(e.get<double>());
        else if (e.is_string())
            out.push_back(e.get<std::string>());
        else if (e.is_boolean())
            out.push_back(e.get<bool>());
        else
            throw std::logic_error("unsupported array element in config tree");
    }
    return out;
}

void insert_json(toml::table& tbl, const std::string& key, const nlohmann::json& value)
{
    if (value.is_object()) {
        toml::table sub;
        for (const auto& [k, v] : value.items())
            insert_json(sub, k, v);
        tbl.insert(key, std::move(sub));
    } else if (value.is_array()) {
        tbl.insert(key, json_array(value));
    } else if (value.is_number_integer()) {
        tbl.insert(key, value.get<std::int64_t>());
    } else if (value.is_number()) {
        tbl.insert(key, value.get<double>());
    } else if (value.is_string()) {
        tbl.insert(key, value.get<std::string>());
    } else if (value.is_boolean()) {
        tbl.insert(key, value.get<bool>());
    } else {
        throw std::logic_error("unsupported value in config tree");
    }
}

} // namespace

std::string to_string(ExperimentKind kind)
{
    switch (kind) {
    case ExperimentKind::Check: return "check";
    case ExperimentKind::Eig: return "eig";
    case ExperimentKind::Simulate: return "simulate";
    case ExperimentKind::Moments: return "moments";
    case ExperimentKind::Aldous: return "aldous";
    case ExperimentKind::Converge: return "converge";
    }
    return "?";
}

ExperimentKind experiment_kind_from_string(const std::string& name)
{
    if (auto k = enum_from(name, kKinds))
        return *k;
    throw std::invalid_argument("unknown experiment kind '" + name + "' (expected one of " + choices(kKinds) + ")");
}

namespace {

std::string join_errors(const std::vector<std::string>& errors)
{
    std::string out = "invalid config:";
    for (const auto& e : errors)
        out += "\n  " + e;
    return out;
}

} // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(join_errors(errors)), errors_(std::move(errors))
{
}

ExperimentConfig parse_config(const std::string& text, std::optional<ExperimentKind> kind, const std::string& source)
{
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << source << ":" << e.source().begin.line << ":" << e.source().begin.column << ": "
            << e.description();
        throw ConfigError({msg.str()});
    }

    ExperimentConfig cfg;
    std::vector<std::string> errors;
    {
        Reader r(&root, "", errors);
        std::string file_kind;
        r.text("kind", file_kind);
        std::optional<ExperimentKind> parsed;
        if (!file_kind.empty()) {
            try {
                parsed = experiment_kind_from_string(file_kind);
            } catch (const std::invalid_argument& e) {
                errors.push_back(std::string("kind: ") + e.what());
            }
        }
        if (kind && parsed && *kind != *parsed)
            errors.push_back("kind: config declares '" + file_kind + "', which does not match the command '" +
                             to_string(*kind) + "'");
        if (kind)
            cfg.kind = *kind;
        else if (parsed)
            cfg.kind = *parsed;
        else if (file_kind.empty())
            errors.emplace_back("kind: missing (give it in the config or on the command line)");
        r.seed("master_seed", cfg.scheme.master_seed);
        r.text("output_dir", cfg.output_dir);
        read_model(r, cfg);
        read_kind(r, cfg);
    }
    append(errors, validate(cfg));
    if (!errors.empty())
        throw ConfigError(errors);
    return cfg;
}

ExperimentConfig load_config(const std::string& path, std::optional<ExperimentKind> kind)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError({"cannot read config file '" + path + "'"});
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), kind, path);
}

std::vector<std::string> validate(const ExperimentConfig& cfg)
{
    std::vector<std::string> errors;
    append(errors, cfg.space.validate());
    append(errors, cfg.drift.validate());
    append(errors, cfg.perturbation.validate());
    append(errors, cfg.noise.validate(cfg.drift.p));
    append(errors, cfg.scheme.validate());
    if (cfg.space.p != cfg.drift.p)
        errors.emplace_back("space.p must equal drift.p");
    for (double c : cfg.initial)
        if (!std::isfinite(c)) {
            errors.emplace_back("initial.coefficients: must be finite");
            break;
        }

    const int available = cfg.space.nodes;
    if (cfg.noise.sigma1_shape == Sigma1Shape::Eigenmode && cfg.noise.m > available)
        errors.emplace_back("noise.m: eigenmode shapes need m <= space.nodes");

    switch (cfg.kind) {
    case ExperimentKind::Check: {
        check_modes("check", cfg.check.n_modes, available, errors);
        try {
            cfg.check.grid.check();
        } catch (const std::exception& e) {
            errors.push_back(std::string("check: ") + e.what());
        }
        const auto& s = cfg.check.sampling;
        if (s.n_states < 1)
            errors.emplace_back("check.n_states: at least 1 state required");
        if (!(s.scale_min > 0.0 && s.scale_min <= s.scale_max))
            errors.emplace_back("check: 0 < scale_min <= scale_max required");
        break;
    }
    case ExperimentKind::Eig:
        if (cfg.eig.count < 0 || cfg.eig.count > available)
            errors.push_back("eig.count: must lie in [0, " + std::to_string(available) + "]");
        break;
    case ExperimentKind::Simulate:
        check_modes("simulate", cfg.simulate.n_modes, available, errors);
        break;
    case ExperimentKind::Moments: {
        check_levels("moments", cfg.moments.levels, available, true, errors);
        check_paths("moments", cfg.moments.paths, errors);
        if (cfg.moments.p_exp.empty())
            errors.emplace_back("moments.p_exp: at least one exponent required");
        for (double p : cfg.moments.p_exp)
            if (!(p >= 1.0)) {
                errors.emplace_back("moments.p_exp: exponents must be >= 1");
                break;
            }
        std::set<double> norms(cfg.moments.x_norms.begin(), cfg.moments.x_norms.end());
        if (norms.size() < 2)
            errors.emplace_back("moments.x_norms: at least 2 distinct magnitudes required");
        for (double x : norms)
            if (!(x >= 0.0) || !std::isfinite(x)) {
                errors.emplace_back("moments.x_norms: magnitudes must be finite and >= 0");
                break;
            }
        double sq = 0.0;
        for (double c : cfg.initial)
            sq += c * c;
        if (!(sq > 0.0))
            errors.emplace_back("initial.coefficients: moments need a nonzero direction");
        if (!(cfg.moments.factor >= 1.0))
            errors.emplace_back("moments.factor: must be >= 1");
        check_confidence("moments.confidence", cfg.moments.confidence, errors);
        break;
    }
    case ExperimentKind::Aldous: {
        const auto& a = cfg.aldous;
        check_modes("aldous", a.n_modes, available, errors);
        check_paths("aldous", a.paths, errors);
        if (a.delta.empty() || a.theta.empty())
            errors.emplace_back("aldous: delta and theta grids must be nonempty");
        for (std::size_t i = 0; i < a.delta.size(); ++i)
            if (!(a.delta[i] > 0.0) || (i > 0 && !(a.delta[i] > a.delta[i - 1]))) {
                errors.emplace_back("aldous.delta: must be positive and strictly increasing");
                break;
            }
        for (double th : a.theta)
            if (!(th >= 0.0 && th <= cfg.scheme.T)) {
                errors.emplace_back("aldous.theta: must lie in [0, T]");
                break;
            }
        if (a.test_function.empty() || static_cast<int>(a.test_function.size()) > a.n_modes)
            errors.emplace_back("aldous.test_function: needs 1 to n_modes coefficients");
        if (!(a.noise_fraction > 0.0))
            errors.emplace_back("aldous.noise_fraction: must be positive");
        if (!(a.excursion_quantile > 0.0 && a.excursion_quantile <= 1.0))
            errors.emplace_back("aldous.excursion_quantile: must lie in (0, 1]");
        if (!(a.excursion_factor > 0.0))
            errors.emplace_back("aldous.excursion_factor: must be positive");
        break;
    }
    case ExperimentKind::Converge:
        check_levels("converge", cfg.converge.levels, available, false, errors);
        check_paths("converge", cfg.converge.paths, errors);
        check_confidence("converge.confidence", cfg.converge.confidence, errors);
        break;
    }
    return errors;
}

nlohmann::json normalized(const ExperimentConfig& cfg)
{
    nlohmann::json j;
    j["kind"] = to_string(cfg.kind);
    j["master_seed"] = static_cast<std::int64_t>(cfg.scheme.master_seed);
    j["space"] = {{"a", cfg.space.a},
                  {"b", cfg.space.b},
                  {"nodes", cfg.space.nodes},
                  {"s", cfg.space.s},
                  {"operator", to_string(cfg.operator_mode)}};
    nlohmann::json drift = {{"family", to_string(cfg.drift.family)},
                            {"p", cfg.drift.p},
                            {"delta1", cfg.drift.delta1},
                            {"delta2", cfg.drift.delta2},
                            {"delta3", cfg.drift.delta3},
                            {"phi1", profile_json(cfg.drift.phi1)},
                            {"phi2", profile_json(cfg.drift.phi2)},
                            {"phi4", profile_json(cfg.drift.phi4)}};
    if (cfg.drift.family == DriftFamily::UserTabulated)
        drift["table"] = table_json(cfg.drift.table);
    j["drift"] = drift;
    j["perturbation"] = {{"family", to_string(cfg.perturbation.family)},
                         {"kappa", cfg.perturbation.kappa},
                         {"phi3", profile_json(cfg.perturbation.phi3)}};
    nlohmann::json noise = {{"m", cfg.noise.m},
                            {"q", cfg.noise.q},
                            {"sigma1", sequence_json(cfg.noise.sigma1)},
                            {"sigma1_shape", to_string(cfg.noise.sigma1_shape)},
                            {"beta", sequence_json(cfg.noise.beta)},
                            {"gamma", sequence_json(cfg.noise.gamma)},
                            {"alpha", doubles(cfg.noise.alphas())},
                            {"sigma2", to_string(cfg.noise.sigma2_family)}};
    if (cfg.noise.sigma2_family == Sigma2Family::UserTabulated)
        noise["psi_table"] = table_json(cfg.noise.psi_table);
    j["noise"] = noise;
    nlohmann::json scheme = {{"name", to_string(cfg.scheme.scheme)},
                             {"dt", cfg.scheme.dt},
                             {"T", cfg.scheme.T},
                             {"stability_guard", cfg.scheme.stability_guard}};
    if (cfg.scheme.tame_diffusion)
        scheme["tame_diffusion"] = *cfg.scheme.tame_diffusion;
    else
        scheme["tame_diffusion"] = "auto";
    j["scheme"] = scheme;
    j["initial"] = {{"coefficients", doubles(cfg.initial)}};

    switch (cfg.kind) {
    case ExperimentKind::Check: {
        const auto& c = cfg.check;
        j["check"] = {{"n_modes", c.n_modes},
                      {"u_max", c.grid.u_max},
                      {"n_u", c.grid.n_u},
                      {"n_pair", c.grid.n_pair},
                      {"t", doubles(c.grid.t)},
                      {"x", doubles(c.grid.x)},
                      {"n_states", c.sampling.n_states},
                      {"scale_min", c.sampling.scale_min},
                      {"scale_max", c.sampling.scale_max},
                      {"state_decay", c.sampling.decay},
                      {"seed", static_cast<std::int64_t>(c.sampling.seed)}};
        break;
    }
    case ExperimentKind::Eig:
        j["eig"] = {{"count", cfg.eig.count}};
        break;
    case ExperimentKind::Simulate:
        j["simulate"] = {{"n_modes", cfg.simulate.n_modes},
                         {"path_index", static_cast<std::int64_t>(cfg.simulate.path_index)}};
        break;
    case ExperimentKind::Moments: {
        const auto& m = cfg.moments;
        j["moments"] = {{"levels", m.levels},
                        {"p_exp", doubles(m.p_exp)},
                        {"x_norms", doubles(m.x_norms)},
                        {"paths", static_cast<std::int64_t>(m.paths)},
                        {"factor", m.factor},
                        {"confidence", m.confidence}};
        break;
    }
    case ExperimentKind::Aldous: {
        const auto& a = cfg.aldous;
        j["aldous"] = {{"n_modes", a.n_modes},
                       {"paths", static_cast<std::int64_t>(a.paths)},
                       {"delta", doubles(a.delta)},
                       {"theta", doubles(a.theta)},
                       {"test_function", doubles(a.test_function)},
                       {"noise_fraction", a.noise_fraction},
                       {"excursion_quantile", a.excursion_quantile},
                       {"excursion_factor", a.excursion_factor}};
        break;
    }
    case ExperimentKind::Converge:
        j["converge"] = {{"levels", cfg.converge.levels},
                         {"paths", static_cast<std::int64_t>(cfg.converge.paths)},
                         {"confidence", cfg.converge.confidence}};
        break;
    }
    return j;
}

std::string config_hash(const ExperimentConfig& cfg)
{
    return sha256_hex(normalized(cfg).dump());
}

std::string to_toml(const ExperimentConfig& cfg)
{
    nlohmann::json tree = normalized(cfg);
    tree["output_dir"] = cfg.output_dir;
    toml::table root;
    // scalars first so they are not swallowed by the last table header
    for (const auto& [k, v] : tree.items())
        if (!v.is_object())
            insert_json(root, k, v);
    for (const auto& [k, v] : tree.items())
        if (v.is_object())
            insert_json(root, k, v);
    std::ostringstream out;
    out << root << '\n';
    return out.str();
}

std::string sha256_hex(const std::string& bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    std::ostringstream hex;
    hex << std::hex << std::setfill('0');
    for (unsigned int i = 0; i < len; ++i)
        hex << std::setw(2) << static_cast<int>(digest[i]);
    return hex.str();
}

std::string sha256_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot read " + path);
    std::ostringstream data;
    data << in.rdbuf();
    return sha256_hex(data.str());
}

} // namespace frsde
