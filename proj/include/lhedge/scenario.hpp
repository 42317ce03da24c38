#pragma once

// Flat key-value scenario files: one `section.field = value` per line, '#'
// starts a comment. Numbers are written in shortest round-trip form so that
// format -> parse reproduces every field bit for bit.

#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

#include "lhedge/errors.hpp"
#include "lhedge/params.hpp"

namespace lhedge {

namespace detail {

inline double* real_field(ModelParams& p, std::string_view key) {
    if (key == "rate.a_r") return &p.rate.a_r;
    if (key == "rate.b_r") return &p.rate.b_r;
    if (key == "rate.sigma_r") return &p.rate.sigma_r;
    if (key == "rate.theta_r") return &p.rate.theta_r;
    if (key == "rate.r0") return &p.rate.r0;
    if (key == "mortality.b_lambda") return &p.mortality.b_lambda;
    if (key == "mortality.sigma_lambda") return &p.mortality.sigma_lambda;
    if (key == "mortality.theta_lambda") return &p.mortality.theta_lambda;
    if (key == "mortality.phi") return &p.mortality.phi;
    if (key == "mortality.m") return &p.mortality.m;
    if (key == "mortality.b") return &p.mortality.b;
    if (key == "mortality.t0") return &p.mortality.t0;
    if (key == "stock.sigma_S") return &p.stock.sigma_S;
    if (key == "stock.sigma_S_r") return &p.stock.sigma_S_r;
    if (key == "stock.theta_S") return &p.stock.theta_S;
    if (key == "scheme.w") return &p.scheme.w;
    if (key == "scheme.r_c") return &p.scheme.r_c;
    if (key == "scheme.r_w") return &p.scheme.r_w;
    if (key == "scheme.T") return &p.scheme.T;
    if (key == "scheme.T_B") return &p.scheme.T_B;
    if (key == "scheme.T_L") return &p.scheme.T_L;
    if (key == "scheme.F0") return &p.scheme.F0;
    if (key == "scheme.gamma") return &p.scheme.gamma;
    if (key == "numerics.dt") return &p.numerics.dt;
    if (key == "numerics.quad_rel_tol") return &p.numerics.quad_rel_tol;
    if (key == "numerics.guarantee_age_cap") return &p.numerics.guarantee_age_cap;
    return nullptr;
}

inline constexpr std::array<std::string_view, 23> kRequiredKeys = {
    "rate.a_r",           "rate.b_r",           "rate.sigma_r",      "rate.theta_r",   "rate.r0",
    "mortality.b_lambda", "mortality.sigma_lambda", "mortality.theta_lambda", "mortality.phi", "mortality.m",
    "mortality.b",        "mortality.t0",       "stock.sigma_S",     "stock.sigma_S_r", "stock.theta_S",
    "scheme.w",           "scheme.r_c",         "scheme.r_w",        "scheme.T",        "scheme.T_B",
    "scheme.T_L",         "scheme.F0",          "scheme.gamma"};

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(std::string_view text, std::size_t line_no) {
    T value{};
    // from_chars rejects a leading '+', accept it for hand-written files.
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ParseError("line " + std::to_string(line_no) + ": cannot parse number '" + std::string(text) + "'");
    }
    return value;
}

}  // namespace detail

/// Shortest decimal string that parses back to exactly `v`.
inline std::string format_real(double v) {
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

/// Parses scenario text and validates the result.
inline ModelParams parse_scenario(std::string_view text) {
    ModelParams p;
    std::set<std::string, std::less<>> seen;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;

        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;

        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError("line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string_view key = detail::trim(line.substr(0, eq));
        const std::string_view value = detail::trim(line.substr(eq + 1));
        if (value.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty value for '" + std::string(key) + "'");
        if (!seen.emplace(key).second) {
            throw ParseError("line " + std::to_string(line_no) + ": duplicate key '" + std::string(key) + "'");
        }

        if (double* field = detail::real_field(p, key)) {
            *field = detail::parse_number<double>(value, line_no);
        } else if (key == "numerics.n_paths") {
            p.numerics.n_paths = detail::parse_number<std::int64_t>(value, line_no);
        } else if (key == "numerics.seed") {
            p.numerics.seed = detail::parse_number<std::uint64_t>(value, line_no);
        } else {
            throw ParseError("line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
        }
    }
    for (auto key : detail::kRequiredKeys) {
        if (!seen.contains(key)) throw ParseError("missing required key '" + std::string(key) + "'");
    }
    validate(p);
    return p;
}

inline ModelParams load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open scenario file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

inline std::string format_scenario(const ModelParams& p) {
    std::ostringstream out;
    auto put = [&](std::string_view key, double v) { out << key << " = " << format_real(v) << '\n'; };
    out << "# rate: CIR short rate\n";
    put("rate.a_r", p.rate.a_r);
    put("rate.b_r", p.rate.b_r);
    put("rate.sigma_r", p.rate.sigma_r);
    put("rate.theta_r", p.rate.theta_r);
    put("rate.r0", p.rate.r0);
    out << "\n# mortality: CIR-type force of mortality, Gompertz-Makeham anchored\n";
    put("mortality.b_lambda", p.mortality.b_lambda);
    put("mortality.sigma_lambda", p.mortality.sigma_lambda);
    put("mortality.theta_lambda", p.mortality.theta_lambda);
    put("mortality.phi", p.mortality.phi);
    put("mortality.m", p.mortality.m);
    put("mortality.b", p.mortality.b);
    put("mortality.t0", p.mortality.t0);
    out << "\n# stock\n";
    put("stock.sigma_S", p.stock.sigma_S);
    put("stock.sigma_S_r", p.stock.sigma_S_r);
    put("stock.theta_S", p.stock.theta_S);
    out << "\n# scheme\n";
    put("scheme.w", p.scheme.w);
    put("scheme.r_c", p.scheme.r_c);
    put("scheme.r_w", p.scheme.r_w);
    put("scheme.T", p.scheme.T);
    put("scheme.T_B", p.scheme.T_B);
    put("scheme.T_L", p.scheme.T_L);
    put("scheme.F0", p.scheme.F0);
    put("scheme.gamma", p.scheme.gamma);
    out << "\n# numerics\n";
    put("numerics.dt", p.numerics.dt);
    out << "numerics.n_paths = " << p.numerics.n_paths << '\n';
    out << "numerics.seed = " << p.numerics.seed << '\n';
    put("numerics.quad_rel_tol", p.numerics.quad_rel_tol);
    put("numerics.guarantee_age_cap", p.numerics.guarantee_age_cap);
    return out.str();
}

inline void save_scenario(const ModelParams& p, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write scenario file " + path.string());
    out << format_scenario(p);
}

}  // namespace lhedge
