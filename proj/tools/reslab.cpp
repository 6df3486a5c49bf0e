// reslab: batch verification front end. Reports are JSON on stdout (and in --out
// when given); samples go to CSV. Exit codes: 0 pass, 1 fail, 2 config error,
// 3 numerical failure, 4 inconclusive.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "reslab/invariants.hpp"
#include "reslab/kinetics.hpp"

using json = nlohmann::json;
using namespace reslab;

namespace {

enum Exit { kPass = 0, kFail = 1, kConfig = 2, kNumerical = 3, kInconclusive = 4 };

struct RunConfig {
    std::string command;
    std::string law = "quadratic";
    int d = 2;
    std::string g, f, W;
    bool W_exchange_symmetric = false;
    bool W_pair_symmetric = false;
    std::string mode = "four-wave";
    std::size_t n = 1000;
    std::uint64_t seed = 1;
    double rmin = 0.5, rmax = 2.0;
    std::string out, summary;
    std::optional<double> tol_zero;
    double pass_tol = kPassTol, fail_tol = kFailTol;
    std::vector<double> at;
    bool gram = true;
};

// Flags as given on the command line; unset ones fall back to the config file.
struct Flags {
    std::optional<std::string> law, g, f, W, mode, out, summary, config;
    std::optional<int> d;
    std::optional<std::size_t> n;
    std::optional<std::uint64_t> seed;
    std::optional<double> rmin, rmax, tol_zero, pass_tol, fail_tol;
    std::vector<double> at;
    bool exchange = false, pairs = false, no_gram = false;
};

json config_json(const RunConfig& c)
{
    json j;
    j["command"] = c.command;
    j["law"] = c.law;
    j["d"] = c.d;
    j["g"] = c.g;
    j["f"] = c.f;
    j["W"] = c.W;
    j["W_exchange_symmetric"] = c.W_exchange_symmetric;
    j["W_pair_symmetric"] = c.W_pair_symmetric;
    j["mode"] = c.mode;
    j["n"] = c.n;
    j["seed"] = c.seed;
    j["rmin"] = c.rmin;
    j["rmax"] = c.rmax;
    j["out"] = c.out;
    j["summary"] = c.summary;
    j["tol_zero"] = c.tol_zero ? json(*c.tol_zero) : json(nullptr);
    j["pass_tol"] = c.pass_tol;
    j["fail_tol"] = c.fail_tol;
    j["at"] = c.at;
    j["gram"] = c.gram;
    return j;
}

template <class T>
T field(const json& j, const char* key)
{
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

void apply_config_file(RunConfig& c, const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
    for (const auto& [key, v] : j.items()) {
        const char* k = key.c_str();
        if (key == "law") c.law = field<std::string>(v, k);
        else if (key == "d") c.d = field<int>(v, k);
        else if (key == "g") c.g = field<std::string>(v, k);
        else if (key == "f") c.f = field<std::string>(v, k);
        else if (key == "W") c.W = field<std::string>(v, k);
        else if (key == "W_exchange_symmetric") c.W_exchange_symmetric = field<bool>(v, k);
        else if (key == "W_pair_symmetric") c.W_pair_symmetric = field<bool>(v, k);
        else if (key == "mode") c.mode = field<std::string>(v, k);
        else if (key == "n") c.n = field<std::size_t>(v, k);
        else if (key == "seed") c.seed = field<std::uint64_t>(v, k);
        else if (key == "rmin") c.rmin = field<double>(v, k);
        else if (key == "rmax") c.rmax = field<double>(v, k);
        else if (key == "out") c.out = field<std::string>(v, k);
        else if (key == "summary") c.summary = field<std::string>(v, k);
        else if (key == "tol_zero") c.tol_zero = v.is_null() ? std::nullopt : std::optional(field<double>(v, k));
        else if (key == "pass_tol") c.pass_tol = field<double>(v, k);
        else if (key == "fail_tol") c.fail_tol = field<double>(v, k);
        else if (key == "at") c.at = field<std::vector<double>>(v, k);
        else if (key == "gram") c.gram = field<bool>(v, k);
        else throw ConfigError("unknown config key '" + key + "'");
    }
}

RunConfig resolve(const std::string& command, const Flags& fl)
{
    RunConfig c;
    c.command = command;
    if (fl.config) apply_config_file(c, *fl.config);
    if (fl.law) c.law = *fl.law;
    if (fl.d) c.d = *fl.d;
    if (fl.g) c.g = *fl.g;
    if (fl.f) c.f = *fl.f;
    if (fl.W) c.W = *fl.W;
    if (fl.exchange) c.W_exchange_symmetric = true;
    if (fl.pairs) c.W_pair_symmetric = true;
    if (fl.mode) c.mode = *fl.mode;
    if (fl.n) c.n = *fl.n;
    if (fl.seed) c.seed = *fl.seed;
    if (fl.rmin) c.rmin = *fl.rmin;
    if (fl.rmax) c.rmax = *fl.rmax;
    if (fl.out) c.out = *fl.out;
    if (fl.summary) c.summary = *fl.summary;
    if (fl.tol_zero) c.tol_zero = fl.tol_zero;
    if (fl.pass_tol) c.pass_tol = *fl.pass_tol;
    if (fl.fail_tol) c.fail_tol = *fl.fail_tol;
    if (!fl.at.empty()) c.at = fl.at;
    if (fl.no_gram) c.gram = false;

    if (c.d < 2 || c.d > 3) throw ConfigError("--d must be 2 or 3");
    if (c.mode != "four-wave" && c.mode != "three-wave") throw ConfigError("--mode must be four-wave or three-wave");
    if (c.n < 1) throw ConfigError("--n must be at least 1");
    if (!(c.pass_tol > 0.0 && c.pass_tol < c.fail_tol)) throw ConfigError("need 0 < pass_tol < fail_tol");
    if (c.tol_zero && !(*c.tol_zero >= 0.0)) throw ConfigError("--tol-zero must be nonnegative");
    return c;
}

void write_atomic(const std::string& path, const std::string& content)
{
    namespace fs = std::filesystem;
    fs::path target(path), tmp(path + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write '" + path + "'");
        out << content;
        out.flush();
        if (!out) throw ConfigError("failed writing '" + path + "'");
    }
    fs::rename(tmp, target);
}

std::string number(double x)
{
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, end);
}

json params_json(const std::string& spec)
{
    json p = json::object();
    auto colon = spec.find(':');
    if (colon == std::string::npos) return p;
    std::string head = detail::trim(spec.substr(0, colon)), tail = spec.substr(colon + 1);
    if (head == "expr") {
        p["expression"] = detail::trim(tail);
        return p;
    }
    for (const auto& item : detail::split_top_level(tail)) {
        auto eq = item.find('=');
        if (eq == std::string::npos) p[detail::trim(item)] = true;
        else p[detail::trim(item.substr(0, eq))] = detail::trim(item.substr(eq + 1));
    }
    return p;
}

json stats_json(const SampleStats& s)
{
    return {{"requested", s.requested},
            {"accepted", s.accepted},
            {"attempts", s.attempts},
            {"gap_rejections", s.gap_rejections},
            {"chart_failures", s.chart_failures},
            {"trivial", s.trivial},
            {"strictly_trivial", s.strictly_trivial},
            {"tangential", s.tangential},
            {"rejection_rate", s.rejection_rate()},
            {"trivial_fraction", s.trivial_fraction()},
            {"max_energy_residual", s.max_energy_residual},
            {"max_momentum_residual", s.max_momentum_residual}};
}

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json opt(std::optional<double> x) { return x ? json(*x) : json(nullptr); }

struct Context {
    RunConfig cfg;
    DispersionLaw law;
    SamplingDomain dom;

    explicit Context(RunConfig c) : cfg(std::move(c)), law(parse_law(cfg.law, cfg.d)), dom{cfg.rmin, cfg.rmax}
    {
        dom.validate();
    }

    Expr expr(const std::string& text, const char* flag) const
    {
        if (text.empty()) throw ConfigError(std::string("missing ") + flag);
        return Expr::parse(text, cfg.d);
    }

    json header() const
    {
        return {{"command", cfg.command},
                {"config", config_json(cfg)},
                {"law", law.label},
                {"params", params_json(cfg.law)},
                {"domain", {{"r_min", dom.r_min}, {"r_max", dom.r_max}}},
                {"n_samples", cfg.n},
                {"seed", cfg.seed}};
    }

    int emit(const json& report, int code) const
    {
        std::string text = report.dump(2) + "\n";
        if (!cfg.out.empty()) write_atomic(cfg.out, text);
        std::cout << text;
        return code;
    }
};

int exit_for(Verdict v) { return v == Verdict::Pass ? kPass : v == Verdict::Fail ? kFail : kInconclusive; }

int exit_for(ZeroVerdict v)
{
    return v == ZeroVerdict::Zero ? kPass : v == ZeroVerdict::Positive ? kFail : kInconclusive;
}

int cmd_resonance_sample(const Context& cx)
{
    if (cx.cfg.out.empty()) throw ConfigError("resonance sample needs --out <csv path>");
    const int d = cx.cfg.d;
    std::ostringstream csv;
    auto cols = [&](const char* name) {
        for (int k = 1; k <= d; ++k) csv << name << '_' << k << ',';
    };
    auto row = [&](const Vec& v) {
        for (int k = 0; k < d; ++k) csv << number(v[k]) << ',';
    };
    SampleStats stats;
    if (cx.cfg.mode == "four-wave") {
        auto s = sample_quadruples(cx.law, cx.dom, cx.cfg.n, cx.cfg.seed);
        stats = s.stats;
        cols("v"), cols("vstar"), cols("vp"), cols("vpstar");
        csv << "weight,energy_residual\r\n";
        for (const auto& q : s.items) {
            row(q.v), row(q.vs), row(q.vp), row(q.vps);
            csv << number(q.weight) << ',' << number(q.energy_residual) << "\r\n";
        }
    } else {
        auto s = sample_triples(cx.law, cx.dom, cx.cfg.n, cx.cfg.seed);
        stats = s.stats;
        cols("v"), cols("vp"), cols("vpp");
        csv << "weight,energy_residual\r\n";
        for (const auto& t : s.items) {
            row(t.v), row(t.vp), row(t.vpp);
            csv << number(t.weight) << ',' << number(t.energy_residual) << "\r\n";
        }
    }
    write_atomic(cx.cfg.out, csv.str());

    json r = cx.header();
    r["mode"] = cx.cfg.mode;
    r["csv"] = cx.cfg.out;
    r["sampler"] = stats_json(stats);
    r["rejection_rate"] = stats.rejection_rate();
    r["max_energy_residual"] = stats.max_energy_residual;
    r["shortfall"] = stats.shortfall();
    r["trivial_manifold"] = stats.accepted > 0 && stats.trivial_fraction() > 0.99;
    std::string text = r.dump(2) + "\n";
    if (!cx.cfg.summary.empty()) write_atomic(cx.cfg.summary, text);
    std::cout << text;
    return stats.accepted == 0 ? kNumerical : kPass;
}

std::vector<Vec> fit_points(const Context& cx)
{
    Stream rng(cx.cfg.seed, 0x666974u);
    std::vector<Vec> pts;
    for (std::size_t k = 0; k < cx.cfg.n; ++k) pts.push_back(rng.annulus(cx.cfg.d, cx.dom.r_min, cx.dom.r_max));
    return pts;
}

json fit_json(const FitResult& f)
{
    return {{"a", f.a}, {"b", vec_json(f.b)}, {"c", f.c}, {"value_res", f.value_residual_rms},
            {"grad_res", f.grad_residual_rms}, {"grad_b", vec_json(f.grad_b)}, {"grad_c", f.grad_c}};
}

int cmd_invariant_check(const Context& cx)
{
    Expr g = cx.expr(cx.cfg.g, "--g");
    json r = cx.header();
    r["mode"] = cx.cfg.mode;
    r["g"] = cx.cfg.g;
    r["tolerances"] = {{"pass", cx.cfg.pass_tol}, {"fail", cx.cfg.fail_tol}};
    json res = {{"four_wave_rms", nullptr}, {"four_wave_max", nullptr}, {"cross_rms", nullptr},
                {"three_wave_rms", nullptr}, {"three_wave_max", nullptr}};
    Verdict verdict;
    if (cx.cfg.mode == "four-wave") {
        auto s = sample_quadruples(cx.law, cx.dom, cx.cfg.n, cx.cfg.seed);
        if (s.items.empty()) throw NumericalError(NumericalError::Kind::Budget, "no resonant quadruple was sampled");
        r["sampler"] = stats_json(s.stats);
        Residual r4 = four_wave_residual(g, s.items);
        res["four_wave_rms"] = r4.rms;
        res["four_wave_max"] = r4.max;
        verdict = classify_residual(r4.rms, cx.cfg.pass_tol, cx.cfg.fail_tol);
        try {
            auto pairs = sample_pairs(cx.law, cx.dom, cx.cfg.n, cx.cfg.seed);
            res["cross_rms"] = cross_product_residual(g, cx.law, pairs).rms;
        } catch (const Error& e) {
            r["notes"].push_back(std::string("cross product: ") + e.what());
        }
        try {
            auto pts = fit_points(cx);
            r["fit"] = fit_json(fit_equilibrium(g, cx.law, pts));
        } catch (const Error& e) {
            r["fit"] = nullptr;
            r["notes"].push_back(std::string("fit: ") + e.what());
        }
        r["gram"] = nullptr;
        if (cx.cfg.gram) {
            try {
                std::vector<Expr> alphas;
                for (const auto& a : default_alpha_family(cx.cfg.d, cx.dom)) alphas.push_back(Expr::parse(a, cx.cfg.d));
                Expr beta = Expr::parse(default_beta(cx.dom), cx.cfg.d);
                GramSystem gs = cramer_coefficients(g, cx.law, beta, alphas, 0, 1, cx.dom);
                r["gram"] = {{"lambda_min", gs.lambda_min},
                             {"c4", gs.c4()}, {"c5", gs.c5()}, {"c6", gs.c6()},
                             {"c7", gs.c7()}, {"c8", gs.c8()}, {"c9", gs.c9()},
                             {"defects", {{"c6", gs.defect_c6()}, {"c8", gs.defect_c8()}, {"c5_c9", gs.defect_c5_c9()}}},
                             {"alpha_fit_residual", gs.alpha_fit_residual},
                             {"weak_form_residual", gs.weak_form_residual}};
            } catch (const Error& e) {
                r["notes"].push_back(std::string("gram: ") + e.what());
            }
        }
    } else {
        auto s = sample_triples(cx.law, cx.dom, cx.cfg.n, cx.cfg.seed);
        if (s.items.empty()) throw NumericalError(NumericalError::Kind::Budget, "no resonant triple was sampled");
        r["sampler"] = stats_json(s.stats);
        Residual r3 = three_wave_residual(g, s.items);
        res["three_wave_rms"] = r3.rms;
        res["three_wave_max"] = r3.max;
        verdict = classify_residual(r3.rms, cx.cfg.pass_tol, cx.cfg.fail_tol);
        r["fit"] = nullptr;
        r["gram"] = nullptr;
    }
    r["residuals"] = res;
    r["verdict"] = to_string(verdict);
    return cx.emit(r, exit_for(verdict));
}

int cmd_invariant_fit(const Context& cx)
{
    Expr g = cx.expr(cx.cfg.g, "--g");
    auto pts = fit_points(cx);
    FitResult f = fit_equilibrium(g, cx.law, pts);
    Verdict v = classify_residual(f.value_residual_rms, cx.cfg.pass_tol, cx.cfg.fail_tol);
    json r = cx.header();
    r["g"] = cx.cfg.g;
    r["fit"] = fit_json(f);
    r["tolerances"] = {{"pass", cx.cfg.pass_tol}, {"fail", cx.cfg.fail_tol}};
    r["verdict"] = to_string(v);
    return cx.emit(r, exit_for(v));
}

int cmd_degeneracy(const Context& cx)
{
    DegeneracyReport rep = degeneracy_report(cx.law, cx.dom, cx.cfg.n, cx.cfg.seed);
    json r = cx.header();
    json pairs = json::array();
    for (const auto& p : rep.pairs)
        pairs.push_back({{"i", p.i + 1}, {"j", p.j + 1}, {"independence_margin", p.independence},
                         {"null_margin", opt(p.null_margin)}});
    r["pairs"] = pairs;
    r["sampler"] = stats_json(rep.sampler);
    r["verdict"] = rep.verdict;
    int code = rep.verdict == "nondegenerate" ? kPass : rep.verdict == "inconclusive" ? kInconclusive : kFail;
    return cx.emit(r, code);
}

int cmd_dissipation(const Context& cx)
{
    Expr f = cx.expr(cx.cfg.f, "--f");
    Dissipation d;
    if (cx.cfg.mode == "four-wave") {
        auto W = WaveKernel::parse(cx.cfg.W, cx.cfg.d, cx.cfg.W_exchange_symmetric, cx.cfg.W_pair_symmetric);
        d = entropy_dissipation_four(f, W, cx.law, cx.dom, cx.cfg.n, cx.cfg.seed, cx.cfg.tol_zero);
    } else {
        auto W = TriadKernel::parse(cx.cfg.W, cx.cfg.d);
        d = entropy_dissipation_three(f, W, cx.law, cx.dom, cx.cfg.n, cx.cfg.seed, cx.cfg.tol_zero);
    }
    json r = cx.header();
    r["operation"] = cx.cfg.mode == "four-wave" ? "entropy_dissipation_four" : "entropy_dissipation_three";
    r["f"] = cx.cfg.f;
    r["W"] = cx.cfg.W.empty() ? "1" : cx.cfg.W;
    r["estimate"] = d.value;
    r["stderr"] = d.stderr_;
    r["scale"] = d.scale;
    r["tol_zero"] = d.tol_zero;
    r["sampler"] = stats_json(d.stats);
    r["verdict"] = to_string(d.verdict);
    return cx.emit(r, exit_for(d.verdict));
}

int cmd_operator(const Context& cx, bool three)
{
    Expr f = cx.expr(cx.cfg.f, "--f");
    if (static_cast<int>(cx.cfg.at.size()) != cx.cfg.d) throw ConfigError("--at needs d comma-separated coordinates");
    Vec v(cx.cfg.d);
    for (int k = 0; k < cx.cfg.d; ++k) v[k] = cx.cfg.at[k];
    Estimate e;
    if (three)
        e = q3_apply(f, TriadKernel::parse(cx.cfg.W, cx.cfg.d), cx.law, v, cx.dom, cx.cfg.n, cx.cfg.seed);
    else
        e = qw_apply(f, WaveKernel::parse(cx.cfg.W, cx.cfg.d), cx.law, v, cx.dom, cx.cfg.n, cx.cfg.seed);
    const double tol = cx.cfg.tol_zero ? *cx.cfg.tol_zero : 3.0 * e.stderr_;
    const bool zero = std::abs(e.value) <= tol;
    json r = cx.header();
    r["operation"] = three ? "q3_apply" : "qw_apply";
    r["f"] = cx.cfg.f;
    r["W"] = cx.cfg.W.empty() ? "1" : cx.cfg.W;
    r["at"] = cx.cfg.at;
    r["estimate"] = e.value;
    r["stderr"] = e.stderr_;
    r["tol_zero"] = tol;
    r["rejected"] = e.rejected;
    r["failures"] = e.failures;
    r["verdict"] = zero ? "zero" : "nonzero";
    return cx.emit(r, zero ? kPass : kFail);
}

void add_common(CLI::App* app, Flags& fl)
{
    app->add_option("--law", fl.law, "dispersion law spec");
    app->add_option("--d", fl.d, "dimension (2 or 3)");
    app->add_option("--n", fl.n, "sample count");
    app->add_option("--seed", fl.seed, "master seed");
    app->add_option("--rmin", fl.rmin, "inner annulus radius");
    app->add_option("--rmax", fl.rmax, "outer annulus radius");
    app->add_option("--out", fl.out, "output path");
    app->add_option("--config", fl.config, "JSON config file");
    app->add_option("--mode", fl.mode, "four-wave or three-wave");
    app->add_option("--pass-tol", fl.pass_tol, "residual below which a candidate passes");
    app->add_option("--fail-tol", fl.fail_tol, "residual above which a candidate fails");
}

void add_kinetic(CLI::App* app, Flags& fl)
{
    app->add_option("--f", fl.f, "distribution f(v)");
    app->add_option("--W", fl.W, "collision kernel (default 1)");
    app->add_option("--tol-zero", fl.tol_zero, "zero threshold override");
    app->add_flag("--W-exchange-symmetric", fl.exchange, "declare W(v*,v,v*',v') = W");
    app->add_flag("--W-pair-symmetric", fl.pairs, "declare W(v',v*',v,v*) = W");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"reslab: resonant manifolds, collisional invariants and entropy dissipation"};
    app.require_subcommand(1);
    Flags fl;

    auto* resonance = app.add_subcommand("resonance", "resonant set sampling")->require_subcommand(1);
    auto* sample = resonance->add_subcommand("sample", "write resonant samples to CSV");
    add_common(sample, fl);
    sample->add_option("--summary", fl.summary, "also write the JSON summary here");

    auto* invariant = app.add_subcommand("invariant", "collisional invariant checks")->require_subcommand(1);
    auto* check = invariant->add_subcommand("check", "residual verdict for a candidate g");
    auto* fit = invariant->add_subcommand("fit", "least-squares fit to a + b.v + c w");
    for (auto* c : {check, fit}) {
        add_common(c, fl);
        c->add_option("--g", fl.g, "candidate invariant g(v)");
    }
    check->add_flag("--no-gram", fl.no_gram, "skip the Gram/Cramer coefficients");

    auto* degeneracy = app.add_subcommand("degeneracy", "nondegeneracy margins of a law");
    add_common(degeneracy, fl);

    auto* dissipation = app.add_subcommand("dissipation", "entropy dissipation of f");
    add_common(dissipation, fl);
    add_kinetic(dissipation, fl);

    auto* qw = app.add_subcommand("qw", "four-wave operator")->require_subcommand(1);
    auto* qw_eval = qw->add_subcommand("eval", "estimate Q_W(f)(v)");
    auto* q3 = app.add_subcommand("q3", "three-wave operator")->require_subcommand(1);
    auto* q3_eval = q3->add_subcommand("eval", "estimate the three-wave operator at v");
    for (auto* c : {qw_eval, q3_eval}) {
        add_common(c, fl);
        add_kinetic(c, fl);
        c->add_option("--at", fl.at, "evaluation point v")->delimiter(',');
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    try {
        if (sample->parsed()) return cmd_resonance_sample(Context(resolve("resonance sample", fl)));
        if (check->parsed()) return cmd_invariant_check(Context(resolve("invariant check", fl)));
        if (fit->parsed()) return cmd_invariant_fit(Context(resolve("invariant fit", fl)));
        if (degeneracy->parsed()) return cmd_degeneracy(Context(resolve("degeneracy", fl)));
        if (dissipation->parsed()) return cmd_dissipation(Context(resolve("dissipation", fl)));
        if (qw_eval->parsed()) return cmd_operator(Context(resolve("qw eval", fl)), false);
        if (q3_eval->parsed()) return cmd_operator(Context(resolve("q3 eval", fl)), true);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kConfig;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumerical;
    } catch (const EvalError& e) {
        std::cerr << "evaluation error: " << e.what() << "\n";
        return kNumerical;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kConfig;
    }
    return kConfig;
}
