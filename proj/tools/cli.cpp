#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "truncnorm/truncnorm.hpp"

namespace truncnorm::cli {
namespace {

using json = nlohmann::ordered_json;

constexpr std::uint64_t kDefaultSeed = 1;

/// Bad user input detected after flag parsing; maps to exit code 2.
class InvalidInput : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Parsing helpers

std::string trim(std::string s)
{
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

double parse_real(const std::string& raw)
{
    std::string s = trim(raw);
    std::string lower = s;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "inf" || lower == "+inf" || lower == "infinity" || lower == "+infinity")
        return kInf;
    if (lower == "-inf" || lower == "-infinity")
        return -kInf;
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw InvalidInput("not a number: '" + raw + "'");
    }
    if (used != s.size() || std::isnan(v))
        throw InvalidInput("not a number: '" + raw + "'");
    return v;
}

std::vector<double> parse_list(const std::string& text)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(parse_real(item));
    if (out.empty())
        throw InvalidInput("empty list: '" + text + "'");
    return out;
}

Vector to_vector(const std::vector<double>& v)
{
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Matrix rows_to_matrix(const std::vector<std::vector<double>>& rows)
{
    if (rows.empty())
        throw InvalidInput("covariance: no rows");
    const std::size_t p = rows.size();
    Matrix m(p, p);
    for (std::size_t r = 0; r < p; ++r) {
        if (rows[r].size() != p)
            throw InvalidInput("covariance: expected a square matrix, row " + std::to_string(r + 1) + " has " +
                               std::to_string(rows[r].size()) + " entries for " + std::to_string(p) + " rows");
        for (std::size_t c = 0; c < p; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return m;
}

/// Inline "[[1,0.5],[0.5,1]]" or a path to a CSV file with one row per line.
Matrix parse_covariance(const std::string& text)
{
    const std::string t = trim(text);
    std::vector<std::vector<double>> rows;
    if (!t.empty() && t.front() == '[') {
        try {
            const json j = json::parse(t);
            for (const auto& row : j)
                rows.push_back(row.get<std::vector<double>>());
        } catch (const json::exception& e) {
            throw InvalidInput("covariance: cannot parse '" + t + "': " + e.what());
        }
    } else {
        std::ifstream in(t);
        if (!in)
            throw InvalidInput("covariance: cannot open file '" + t + "'");
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty())
                continue;
            rows.push_back(parse_list(line));
        }
    }
    return rows_to_matrix(rows);
}

// ---------------------------------------------------------------------------
// Formatting

std::string fmt17(double v)
{
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_fixed(double v, int digits)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// RFC 4180 quoting
std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\r\n") == std::string::npos)
        return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"')
            q += '"';
        q += c;
    }
    return q + "\"";
}

json real_json(double v)
{
    if (std::isfinite(v))
        return v;
    return std::isnan(v) ? json("nan") : json(v > 0 ? "inf" : "-inf");
}

std::string sha256_hex(const std::string& bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i)
        os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return os.str();
}

// ---------------------------------------------------------------------------
// Output and manifest

struct RunContext
{
    std::string command;
    std::vector<std::string> argv; // normalized: always carries the resolved seed
    std::optional<std::uint64_t> seed;
    std::ostream& out;
    std::ostream& err;
};

json manifest_header(const RunContext& ctx, const json& parameters)
{
    json m;
    m["tool"] = "truncnorm";
    m["version"] = kVersion;
    m["command"] = ctx.command;
    m["seed"] = ctx.seed ? json(*ctx.seed) : json(nullptr);
    m["parameters"] = parameters;
    m["argv"] = ctx.argv;
    return m;
}

void write_file(const std::string& path, const std::string& bytes)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw std::ios_base::failure("cannot open '" + path + "' for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f)
        throw std::ios_base::failure("write to '" + path + "' failed");
}

/// Writes `payload` to `path` (or ctx.out when empty). With a path, a
/// `<path>.manifest.json` sidecar records parameters, summary and the
/// SHA-256 of the payload, and the summary is echoed to ctx.out.
void emit(const RunContext& ctx, const std::string& path, const std::string& payload, const json& parameters,
          const json& summary)
{
    if (path.empty()) {
        ctx.out << payload;
        if (!summary.is_null())
            ctx.err << summary.dump() << '\n';
        return;
    }
    write_file(path, payload);
    json manifest = manifest_header(ctx, parameters);
    manifest["outputs"] = json::array({json{{"path", path}, {"bytes", payload.size()}, {"sha256", sha256_hex(payload)}}});
    manifest["summary"] = summary;
    write_file(path + ".manifest.json", manifest.dump(2) + "\n");
    if (!summary.is_null())
        ctx.out << summary.dump() << '\n';
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag)
{
    if (flag)
        return *flag;
    if (const char* env = std::getenv("TRUNCNORM_SEED")) {
        try {
            std::size_t used = 0;
            const std::string s = trim(env);
            const unsigned long long v = std::stoull(s, &used, 0);
            if (used == s.size() && !s.empty() && s.front() != '-')
                return v;
        } catch (const std::exception&) {
        }
        throw InvalidInput(std::string("TRUNCNORM_SEED is not an unsigned integer: '") + env + "'");
    }
    return kDefaultSeed;
}

std::vector<std::string> with_seed(std::vector<std::string> args, const std::optional<std::uint64_t>& flag,
                                   std::uint64_t seed)
{
    if (!flag) {
        args.emplace_back("--seed");
        args.push_back(std::to_string(seed));
    }
    return args;
}

// ---------------------------------------------------------------------------
// sample-uni

struct SampleUniArgs
{
    double mu = 0.0;
    double sigma = 1.0;
    std::string lower = "-inf";
    std::string upper = "inf";
    std::uint64_t n = 1000;
    std::optional<std::uint64_t> seed;
    std::string method = "auto";
    std::string out;
    std::string format = "csv";
    bool summary_only = false;
    std::uint64_t max_proposals = 1'000'000;
};

SamplerMethod method_from_flag(const std::string& name)
{
    if (name == "auto")
        return SamplerMethod::Auto;
    if (name == "normal")
        return SamplerMethod::RepeatedNormal;
    if (name == "inversion")
        return SamplerMethod::Inversion;
    if (name == "exp-ar")
        return SamplerMethod::ExponentialAR;
    if (name == "uniform-ar")
        return SamplerMethod::UniformAR;
    throw InvalidInput("unknown method '" + name + "'");
}

// The concrete method draw_truncated() runs for this spec.
std::string dispatched_method(const UnivariateTruncationSpec& spec, SamplerMethod m)
{
    const auto [a, b] = standardize(spec);
    if (!spec.has_lower() && !spec.has_upper())
        return m == SamplerMethod::Inversion ? "inversion" : "standard-normal";
    if (spec.has_lower() && spec.has_upper()) {
        if (m == SamplerMethod::Auto) {
            const auto c = choose_two_sided_method(a, b);
            return std::string(to_string(c.method)) + (c.reflected ? " (reflected)" : "");
        }
        return std::string(to_string(m == SamplerMethod::ExponentialAR ? SamplerMethod::OneSidedThenReject : m));
    }
    const double t = spec.has_lower() ? a : -b;
    if (m == SamplerMethod::Auto)
        m = t < 0.0 ? SamplerMethod::RepeatedNormal : SamplerMethod::ExponentialAR;
    return std::string(to_string(m)) + (spec.has_lower() ? "" : " (reflected)");
}

int cmd_sample_uni(const SampleUniArgs& args, RunContext& ctx)
{
    const double lower = parse_real(args.lower);
    const double upper = parse_real(args.upper);
    const SamplerMethod method = method_from_flag(args.method);
    const auto spec = std::isinf(lower) && std::isinf(upper) && lower < 0 && upper > 0
                          ? UnivariateTruncationSpec::untruncated(args.mu, args.sigma)
                          : UnivariateTruncationSpec(args.mu, args.sigma, lower, upper);
    if (args.n < 1)
        throw InvalidInput("--n must be at least 1");
    const SamplerOptions opts{args.max_proposals};
    const std::string dispatched = dispatched_method(spec, method);
    if (method == SamplerMethod::UniformAR && !(spec.has_lower() && spec.has_upper()))
        throw InvalidInput("uniform-ar needs finite lower and upper bounds");

    RandomStream rng(*ctx.seed);
    std::vector<double> values;
    values.reserve(args.n);
    AcceptanceStats stats;
    for (std::uint64_t i = 0; i < args.n; ++i) {
        const DrawResult r = draw_truncated(spec, method, rng, opts);
        stats.record(r);
        values.push_back(r.value);
    }

    double mean = 0.0;
    for (double v : values)
        mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values)
        ss += (v - mean) * (v - mean);
    const double var = values.size() > 1 ? ss / static_cast<double>(values.size() - 1) : 0.0;

    json summary;
    summary["n"] = args.n;
    summary["method"] = args.method;
    summary["dispatched"] = dispatched;
    summary["mean"] = mean;
    summary["variance"] = var;
    summary["proposals"] = stats.proposals;
    summary["acceptance_rate"] = stats.rate().value();
    const auto analytic = analytic_acceptance(spec, method);
    summary["analytic_acceptance"] = analytic ? json(*analytic) : json(nullptr);
    try {
        const auto m = truncated_moments(spec);
        summary["analytic_mean"] = m.mean;
        summary["analytic_variance"] = m.variance;
    } catch (const DomainError&) {
        summary["analytic_mean"] = nullptr;
        summary["analytic_variance"] = nullptr;
    }

    json params;
    params["mu"] = args.mu;
    params["sigma"] = args.sigma;
    params["lower"] = real_json(lower);
    params["upper"] = real_json(upper);
    params["n"] = args.n;
    params["method"] = args.method;
    params["format"] = args.format;
    params["max_proposals"] = args.max_proposals;

    std::string payload;
    if (args.format == "json") {
        json doc;
        doc["manifest"] = manifest_header(ctx, params);
        doc["summary"] = summary;
        if (!args.summary_only) {
            json draws = json::array();
            for (double v : values)
                draws.push_back(v);
            doc["draws"] = std::move(draws);
        }
        payload = doc.dump() + "\n";
    } else {
        std::string body = "value\n";
        body.reserve(values.size() * 24);
        if (!args.summary_only) {
            for (double v : values) {
                body += fmt17(v);
                body += '\n';
            }
        }
        payload = std::move(body);
    }
    emit(ctx, args.out, payload, params, summary);
    return kSuccess;
}

// ---------------------------------------------------------------------------
// tables

struct TablesArgs
{
    std::string which = "2.1";
    bool empirical = false;
    std::uint64_t n = 1'000'000;
    std::optional<std::uint64_t> seed;
    std::string out;
};

constexpr double kOneSidedPoints[] = {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
constexpr double kTwoSidedLower[] = {0.0, 0.5, 1.0, 1.5, 2.0};
constexpr double kTwoSidedRange[] = {2.0, 1.0, 0.5, 0.1};

template <typename Draw>
AcceptanceStats measure(std::uint64_t proposals, std::uint64_t seed, Draw draw)
{
    RandomStream rng(seed);
    AcceptanceStats stats;
    while (stats.proposals < proposals)
        stats.record(draw(rng));
    return stats;
}

std::string empirical_columns(const AcceptanceStats& s, double analytic)
{
    const double se = s.standard_error();
    const double z = se > 0.0 ? (s.rate() - analytic) / se : 0.0;
    return "," + fmt17(s.rate()) + "," + fmt17(se) + "," + std::to_string(s.proposals) + "," + fmt_fixed(z, 3);
}

int cmd_tables(const TablesArgs& args, RunContext& ctx)
{
    if (args.empirical && args.n < 1)
        throw InvalidInput("--n must be at least 1");
    std::string csv;
    json summary;
    summary["which"] = args.which;
    summary["mode"] = args.empirical ? "empirical" : "analytic";
    std::uint64_t cell = 0;

    if (args.which == "2.1") {
        csv = "mu_minus,alpha_star,analytic,analytic_3dp";
        if (args.empirical)
            csv += ",empirical,std_error,proposals,z_score";
        csv += "\n";
        json rows = json::array();
        for (double a : kOneSidedPoints) {
            const double alpha = alpha_star(a);
            const double p = acceptance_one_sided(a, alpha);
            csv += fmt17(a) + "," + fmt17(alpha) + "," + fmt17(p) + "," + fmt_fixed(p, 3);
            json row{{"mu_minus", a}, {"analytic", p}};
            if (args.empirical) {
                const auto s = measure(args.n, derive_seed(*ctx.seed, cell), [a](RandomStream& r) {
                    return draw_one_sided(a, SamplerMethod::ExponentialAR, r);
                });
                csv += empirical_columns(s, p);
                row["empirical"] = s.rate().value();
            }
            csv += "\n";
            rows.push_back(std::move(row));
            ++cell;
        }
        summary["rows"] = std::move(rows);
    } else {
        csv = "mu_minus,range,mu_plus,method,analytic,analytic_3dp";
        if (args.empirical)
            csv += ",empirical,std_error,proposals,z_score";
        csv += "\n";
        json rows = json::array();
        for (double w : kTwoSidedRange) {
            for (double a : kTwoSidedLower) {
                const double b = a + w;
                const auto choice = choose_two_sided_method(a, b);
                const double p = acceptance_two_sided(a, b, SamplerMethod::Auto);
                csv += fmt17(a) + "," + fmt17(w) + "," + fmt17(b) + "," + csv_field(std::string(to_string(choice.method))) +
                       "," + fmt17(p) + "," + fmt_fixed(p, 3);
                json row{{"mu_minus", a}, {"range", w}, {"method", to_string(choice.method)}, {"analytic", p}};
                if (args.empirical) {
                    const auto s = measure(args.n, derive_seed(*ctx.seed, cell), [a, b](RandomStream& r) {
                        return draw_two_sided(a, b, SamplerMethod::Auto, r);
                    });
                    csv += empirical_columns(s, p);
                    row["empirical"] = s.rate().value();
                }
                csv += "\n";
                rows.push_back(std::move(row));
                ++cell;
            }
        }
        summary["rows"] = std::move(rows);
    }

    json params{{"which", args.which}, {"empirical", args.empirical}, {"n", args.n}};
    emit(ctx, args.out, csv, params, args.out.empty() ? json(nullptr) : summary);
    return kSuccess;
}

// ---------------------------------------------------------------------------
// bound-curve

struct BoundCurveArgs
{
    double a_min = 0.0;
    double a_max = 5.0;
    std::uint64_t steps = 500;
    std::string out;
};

int cmd_bound_curve(const BoundCurveArgs& args, RunContext& ctx)
{
    if (!(args.a_min >= 0.0) || !std::isfinite(args.a_max))
        throw InvalidInput("--a-min must be nonnegative and --a-max finite");
    if (!(args.a_max > args.a_min) || args.steps < 2)
        throw InvalidInput("need --a-max > --a-min and --steps >= 2");
    std::string csv = "mu_minus,bound,gap\n";
    for (std::uint64_t k = 0; k < args.steps; ++k) {
        const double a = args.a_min + (args.a_max - args.a_min) * static_cast<double>(k) /
                                          static_cast<double>(args.steps - 1);
        const double bound = eq21_bound(a);
        csv += fmt17(a) + "," + fmt17(bound) + "," + fmt17(bound - a) + "\n";
    }
    json params{{"a_min", args.a_min}, {"a_max", args.a_max}, {"steps", args.steps}};
    emit(ctx, args.out, csv, params, nullptr);
    return kSuccess;
}

// ---------------------------------------------------------------------------
// sample-mvn

struct SampleMvnArgs
{
    std::string mean;
    std::string cov;
    std::string region = "ball";
    std::string center;
    double radius = 1.0;
    std::string box_lower;
    std::string box_upper;
    std::string order_lower = "-inf";
    std::string order_upper = "inf";
    std::string initial;
    std::uint64_t n = 1000;
    std::uint64_t burnin = 1000;
    std::uint64_t thin = 1;
    std::optional<std::uint64_t> seed;
    std::string engine = "gibbs";
    std::string out;
    std::string format = "csv";
    bool summary_only = false;
    std::uint64_t chains = 1;
    std::vector<std::string> indicators;
    std::uint64_t max_proposals = 1'000'000;
};

struct Indicator
{
    std::string expr;
    Eigen::Index index;
    bool greater;
    double threshold;

    double operator()(const Vector& t) const
    {
        return (greater ? t(index) > threshold : t(index) < threshold) ? 1.0 : 0.0;
    }
};

// "2>0.5" is the indicator of theta_2 > 0.5 (1-based coordinates).
Indicator parse_indicator(const std::string& expr, Eigen::Index p)
{
    const auto pos = expr.find_first_of("<>");
    if (pos == std::string::npos || pos == 0)
        throw InvalidInput("indicator must look like INDEX>VALUE or INDEX<VALUE: '" + expr + "'");
    long idx = 0;
    try {
        idx = std::stol(expr.substr(0, pos));
    } catch (const std::exception&) {
        throw InvalidInput("indicator index is not an integer: '" + expr + "'");
    }
    if (idx < 1 || idx > p)
        throw InvalidInput("indicator index out of range: '" + expr + "'");
    return {expr, static_cast<Eigen::Index>(idx - 1), expr[pos] == '>', parse_real(expr.substr(pos + 1))};
}

Vector default_initial(const ConvexRegion& region, const Vector& mean)
{
    const Eigen::Index p = mean.size();
    return std::visit(
        [&](const auto& r) -> Vector {
            using R = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<R, Ball>) {
                return r.center;
            } else if constexpr (std::is_same_v<R, Box>) {
                Vector x(p);
                for (Eigen::Index j = 0; j < p; ++j) {
                    const double lo = r.lower(j), hi = r.upper(j);
                    if (std::isfinite(lo) && std::isfinite(hi))
                        x(j) = 0.5 * (lo + hi);
                    else if (std::isfinite(lo))
                        x(j) = std::max(lo + 1.0, mean(j));
                    else if (std::isfinite(hi))
                        x(j) = std::min(hi - 1.0, mean(j));
                    else
                        x(j) = mean(j);
                }
                return x;
            } else {
                Vector x(p);
                for (Eigen::Index k = 0; k < p; ++k) {
                    const double t = static_cast<double>(k);
                    if (std::isfinite(r.floor) && std::isfinite(r.ceiling))
                        x(k) = r.floor + (r.ceiling - r.floor) * (t + 1.0) / static_cast<double>(p + 1);
                    else if (std::isfinite(r.floor))
                        x(k) = r.floor + t + 1.0;
                    else if (std::isfinite(r.ceiling))
                        x(k) = r.ceiling - static_cast<double>(p) + t;
                    else
                        x(k) = t - 0.5 * static_cast<double>(p - 1);
                }
                return x;
            }
        },
        region);
}

ConvexRegion build_region(const SampleMvnArgs& args, const Vector& mean)
{
    const auto p = mean.size();
    auto sized = [p](const std::string& flag, const std::string& text) {
        const Vector v = to_vector(parse_list(text));
        if (v.size() != p)
            throw InvalidInput(flag + " has " + std::to_string(v.size()) + " entries, expected " + std::to_string(p));
        return v;
    };
    try {
        if (args.region == "ball")
            return Ball(args.center.empty() ? mean : sized("--center", args.center), args.radius);
        if (args.region == "box") {
            if (args.box_lower.empty() || args.box_upper.empty())
                throw InvalidInput("box region needs --box-lower and --box-upper");
            return Box(sized("--box-lower", args.box_lower), sized("--box-upper", args.box_upper));
        }
        const double lo = parse_real(args.order_lower), hi = parse_real(args.order_upper);
        if (!(lo < hi))
            throw InvalidInput("order region needs --order-lower < --order-upper");
        return OrderCone{lo, hi};
    } catch (const DomainError& e) {
        throw InvalidInput(e.what());
    }
}

int cmd_sample_mvn(const SampleMvnArgs& args, RunContext& ctx)
{
    const Vector mean = to_vector(parse_list(args.mean));
    const Matrix cov = parse_covariance(args.cov);
    if (cov.rows() != mean.size())
        throw InvalidInput("covariance is " + std::to_string(cov.rows()) + "x" + std::to_string(cov.cols()) +
                           " but --mean has " + std::to_string(mean.size()) + " entries");
    std::optional<MvnSpec> spec;
    try {
        spec.emplace(mean, cov);
    } catch (const std::exception& e) {
        throw InvalidInput(e.what());
    }
    const double cond = condition_estimate(cov);
    if (cond > 1e6)
        ctx.err << "warning: covariance condition number estimate " << fmt17(cond) << " exceeds 1e6\n";

    const ConvexRegion region = build_region(args, mean);
    const Vector initial = args.initial.empty() ? default_initial(region, mean) : to_vector(parse_list(args.initial));
    if (initial.size() != mean.size() || !contains(region, initial))
        throw InvalidInput("initial point lies outside the region");
    if (args.n < 1 || args.thin < 1 || args.chains < 1)
        throw InvalidInput("--n, --thin and --chains must be at least 1");
    const bool gibbs = args.engine == "gibbs";

    std::vector<Indicator> indicators;
    for (const auto& e : args.indicators)
        indicators.push_back(parse_indicator(e, mean.size()));

    struct ChainResult
    {
        std::vector<Vector> draws;
        std::uint64_t trials = 0;
        std::uint64_t sweeps = 0;
        std::exception_ptr error;
    };
    std::vector<ChainResult> results(args.chains);
    auto run_one = [&](std::size_t c) {
        const std::uint64_t seed = args.chains == 1 ? *ctx.seed : derive_seed(*ctx.seed, c);
        try {
            if (gibbs) {
                ChainConfig config{initial, args.n, args.burnin, args.thin, seed, SamplerOptions{args.max_proposals}};
                auto chain = run_chain(*spec, region, config);
                results[c].draws = std::move(chain.draws);
                results[c].trials = chain.univariate_trials;
                results[c].sweeps = chain.total_sweeps;
            } else {
                RandomStream rng(seed);
                results[c].draws.reserve(args.n);
                for (std::uint64_t i = 0; i < args.n; ++i) {
                    auto d = mvn_rejection(*spec, region, rng, args.max_proposals);
                    results[c].trials += d.trials;
                    results[c].draws.push_back(std::move(d.value));
                }
            }
        } catch (...) {
            results[c].error = std::current_exception();
        }
    };
    if (args.chains == 1) {
        run_one(0);
    } else {
        std::vector<std::thread> workers;
        for (std::size_t c = 0; c < args.chains; ++c)
            workers.emplace_back(run_one, c);
        for (auto& w : workers)
            w.join();
    }
    for (auto& r : results)
        if (r.error)
            std::rethrow_exception(r.error);

    // summary
    std::vector<Vector> all;
    for (const auto& r : results)
        all.insert(all.end(), r.draws.begin(), r.draws.end());
    const Eigen::Index p = mean.size();
    json summary;
    summary["engine"] = args.engine;
    summary["p"] = p;
    summary["chains"] = args.chains;
    summary["draws_per_chain"] = args.n;
    summary["total_draws"] = all.size();
    json means = json::array();
    for (Eigen::Index j = 0; j < p; ++j)
        means.push_back(ergodic_average(all, [j](const Vector& t) { return t(j); }));
    summary["coordinate_means"] = std::move(means);
    json ind = json::array();
    for (const auto& i : indicators)
        ind.push_back(json{{"expr", i.expr}, {"mean", ergodic_average(all, i)}});
    summary["indicators"] = std::move(ind);
    std::uint64_t trials = 0, sweeps = 0;
    for (const auto& r : results) {
        trials += r.trials;
        sweeps += r.sweeps;
    }
    if (gibbs) {
        summary["total_sweeps"] = sweeps;
        summary["univariate_proposals"] = trials;
    } else {
        summary["proposals"] = trials;
        summary["acceptance_rate"] = static_cast<double>(all.size()) / static_cast<double>(trials);
    }
    if (args.chains >= 2 && args.n >= 100) {
        json ratios = json::array();
        for (Eigen::Index j = 0; j < p; ++j) {
            std::vector<std::vector<double>> series;
            for (const auto& r : results) {
                std::vector<double> s;
                for (const auto& d : r.draws)
                    s.push_back(d(j));
                series.push_back(std::move(s));
            }
            ratios.push_back(real_json(multi_chain_spread(series).ratio));
        }
        summary["spread_ratio"] = std::move(ratios);
    }

    json params;
    params["mean"] = args.mean;
    params["cov"] = args.cov;
    params["region"] = args.region;
    params["radius"] = args.radius;
    params["center"] = args.center;
    params["box_lower"] = args.box_lower;
    params["box_upper"] = args.box_upper;
    params["order_lower"] = args.order_lower;
    params["order_upper"] = args.order_upper;
    params["initial"] = args.initial;
    params["n"] = args.n;
    params["burnin"] = args.burnin;
    params["thin"] = args.thin;
    params["engine"] = args.engine;
    params["chains"] = args.chains;
    params["indicators"] = args.indicators;
    params["max_proposals"] = args.max_proposals;

    std::string payload;
    if (args.format == "json") {
        json doc;
        doc["manifest"] = manifest_header(ctx, params);
        doc["summary"] = summary;
        if (!args.summary_only) {
            json draws = json::array();
            for (std::size_t c = 0; c < results.size(); ++c) {
                for (const auto& d : results[c].draws) {
                    json row = json::array();
                    for (Eigen::Index j = 0; j < p; ++j)
                        row.push_back(d(j));
                    draws.push_back(std::move(row));
                }
            }
            doc["draws"] = std::move(draws);
            if (args.chains > 1) {
                json tags = json::array();
                for (std::size_t c = 0; c < results.size(); ++c)
                    for (std::size_t k = 0; k < results[c].draws.size(); ++k)
                        tags.push_back(c);
                doc["chain"] = std::move(tags);
            }
        }
        payload = doc.dump() + "\n";
    } else {
        std::string body = "chain";
        for (Eigen::Index j = 0; j < p; ++j)
            body += ",theta_" + std::to_string(j + 1);
        body += "\n";
        if (!args.summary_only) {
            for (std::size_t c = 0; c < results.size(); ++c) {
                const std::string tag = std::to_string(c);
                for (const auto& d : results[c].draws) {
                    body += tag;
                    for (Eigen::Index j = 0; j < p; ++j) {
                        body += ',';
                        body += fmt17(d(j));
                    }
                    body += '\n';
                }
            }
        }
        payload = std::move(body);
    }
    emit(ctx, args.out, payload, params, summary);
    return kSuccess;
}

// ---------------------------------------------------------------------------
// replay

int cmd_replay(const std::string& manifest_path, const std::string& out_override, std::ostream& out,
               std::ostream& err)
{
    std::ifstream in(manifest_path);
    if (!in)
        throw InvalidInput("cannot open manifest '" + manifest_path + "'");
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::exception& e) {
        throw InvalidInput("manifest is not valid JSON: " + std::string(e.what()));
    }
    if (!manifest.contains("argv") || !manifest.contains("outputs"))
        throw InvalidInput("manifest lacks argv/outputs");
    auto argv = manifest["argv"].get<std::vector<std::string>>();
    const auto& recorded = manifest["outputs"].at(0);
    std::string target = recorded["path"].get<std::string>();
    if (!out_override.empty()) {
        const auto it = std::find(argv.begin(), argv.end(), "--out");
        if (it == argv.end() || it + 1 == argv.end())
            throw InvalidInput("manifest argv has no --out to override");
        *(it + 1) = out_override;
        target = out_override;
    }

    std::ostringstream quiet;
    const int code = run(argv, quiet, err);
    if (code != kSuccess)
        return code;
    std::ifstream produced(target, std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(produced)), std::istreambuf_iterator<char>());
    const bool same = sha256_hex(bytes) == recorded["sha256"].get<std::string>();
    out << (same ? "replay matches " : "replay MISMATCH ") << target << '\n';
    return same ? kSuccess : 1;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Truncated normal samplers, acceptance tables and constrained Gibbs sampling", "truncnorm"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    SampleUniArgs uni;
    auto* su = app.add_subcommand("sample-uni", "Draw from a univariate truncated normal");
    su->add_option("--mu", uni.mu, "Location")->capture_default_str();
    su->add_option("--sigma", uni.sigma, "Scale (> 0)")->capture_default_str();
    su->add_option("--lower", uni.lower, "Lower bound, may be -inf")->capture_default_str();
    su->add_option("--upper", uni.upper, "Upper bound, may be inf")->capture_default_str();
    su->add_option("--n", uni.n, "Number of draws")->capture_default_str();
    su->add_option("--seed", uni.seed, "Seed (falls back to TRUNCNORM_SEED)");
    su->add_option("--method", uni.method, "Sampler")
        ->check(CLI::IsMember({"auto", "normal", "inversion", "exp-ar", "uniform-ar"}))
        ->capture_default_str();
    su->add_option("--out", uni.out, "Output path (default stdout)");
    su->add_option("--format", uni.format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    su->add_flag("--summary-only", uni.summary_only, "Omit the draws");
    su->add_option("--max-proposals", uni.max_proposals, "Accept-reject cap per draw")->capture_default_str();

    TablesArgs tab;
    auto* tb = app.add_subcommand("tables", "Acceptance-probability tables (one-sided 2.1, two-sided 2.2)");
    tb->add_option("--which", tab.which)->check(CLI::IsMember({"2.1", "2.2"}))->capture_default_str();
    auto* analytic_flag = tb->add_flag("--analytic", "Analytic column only (default)");
    tb->add_flag("--empirical", tab.empirical, "Add an empirical column")->excludes(analytic_flag);
    tb->add_option("--n", tab.n, "Proposals per cell for --empirical")->capture_default_str();
    tb->add_option("--seed", tab.seed, "Seed (falls back to TRUNCNORM_SEED)");
    tb->add_option("--out", tab.out, "Output path (default stdout)");

    BoundCurveArgs bc;
    auto* bcc = app.add_subcommand("bound-curve", "Upper-bound threshold above which the one-sided sampler wins");
    bcc->add_option("--a-min", bc.a_min)->capture_default_str();
    bcc->add_option("--a-max", bc.a_max)->capture_default_str();
    bcc->add_option("--steps", bc.steps, "Number of grid points")->capture_default_str();
    bcc->add_option("--out", bc.out, "Output path (default stdout)");

    SampleMvnArgs mvn;
    auto* sm = app.add_subcommand("sample-mvn", "Multivariate normal restricted to a convex region");
    sm->add_option("--mean", mvn.mean, "Comma-separated mean vector")->required();
    sm->add_option("--cov", mvn.cov, "Covariance: inline [[..],[..]] or CSV file")->required();
    sm->add_option("--region", mvn.region)->check(CLI::IsMember({"ball", "box", "order"}))->capture_default_str();
    sm->add_option("--center", mvn.center, "Ball center (default: mean)");
    sm->add_option("--radius", mvn.radius, "Ball radius")->capture_default_str();
    sm->add_option("--box-lower", mvn.box_lower, "Comma-separated lower corner");
    sm->add_option("--box-upper", mvn.box_upper, "Comma-separated upper corner");
    sm->add_option("--order-lower", mvn.order_lower, "Floor for the ordered region")->capture_default_str();
    sm->add_option("--order-upper", mvn.order_upper, "Ceiling for the ordered region")->capture_default_str();
    sm->add_option("--initial", mvn.initial, "Starting point (must lie in the region)");
    sm->add_option("--n", mvn.n, "Kept draws per chain")->capture_default_str();
    sm->add_option("--burnin", mvn.burnin)->capture_default_str();
    sm->add_option("--thin", mvn.thin)->capture_default_str();
    sm->add_option("--seed", mvn.seed, "Seed (falls back to TRUNCNORM_SEED)");
    sm->add_option("--engine", mvn.engine)->check(CLI::IsMember({"gibbs", "rejection"}))->capture_default_str();
    sm->add_option("--out", mvn.out, "Output path (default stdout)");
    sm->add_option("--format", mvn.format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    sm->add_flag("--summary-only", mvn.summary_only, "Omit the draws");
    sm->add_option("--chains", mvn.chains, "Independent chains, run concurrently")->capture_default_str();
    sm->add_option("--indicator", mvn.indicators, "Indicator functional, e.g. 1>0 (repeatable)");
    sm->add_option("--max-proposals", mvn.max_proposals, "Rejection / accept-reject cap")->capture_default_str();

    std::string manifest_path, replay_out;
    auto* rp = app.add_subcommand("replay", "Re-run a command from its manifest and verify the checksum");
    rp->add_option("manifest", manifest_path, "Manifest JSON written next to an output")->required();
    rp->add_option("--out", replay_out, "Write to this path instead of the recorded one");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kInvalidInput;
    }

    try {
        if (rp->parsed())
            return cmd_replay(manifest_path, replay_out, out, err);
        if (bcc->parsed()) {
            RunContext ctx{"bound-curve", args, std::nullopt, out, err};
            return cmd_bound_curve(bc, ctx);
        }
        std::optional<std::uint64_t> flag;
        std::string name;
        if (su->parsed()) {
            flag = uni.seed;
            name = "sample-uni";
        } else if (tb->parsed()) {
            flag = tab.seed;
            name = "tables";
        } else {
            flag = mvn.seed;
            name = "sample-mvn";
        }
        const std::uint64_t seed = resolve_seed(flag);
        RunContext ctx{name, with_seed(args, flag, seed), seed, out, err};
        if (su->parsed())
            return cmd_sample_uni(uni, ctx);
        if (tb->parsed())
            return cmd_tables(tab, ctx);
        return cmd_sample_mvn(mvn, ctx);
    } catch (const InvalidInput& e) {
        err << "error: " << e.what() << '\n';
        return kInvalidInput;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kInvalidInput;
    } catch (const NotPositiveDefinite& e) {
        err << "error: " << e.what() << '\n';
        return kInvalidInput;
    } catch (const SamplingFailure& e) {
        err << "sampling failure: " << e.what() << '\n';
        return kSamplingFailure;
    } catch (const InconsistentState& e) {
        err << "sampling failure: " << e.what() << '\n';
        return kSamplingFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kIoError;
    }
}

} // namespace truncnorm::cli
