#include "stwave_app/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "stwave/diagnostics.hpp"

namespace stwave::app {

namespace {

std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Drops a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view s)
{
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"')
            quoted = !quoted;
        else if (s[i] == '#' && !quoted)
            return s.substr(0, i);
    }
    return s;
}

[[noreturn]] void fail(int line, const std::string& msg)
{
    throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

std::string as_string(std::string_view v, int line)
{
    if (v.size() < 2 || v.front() != '"' || v.back() != '"')
        fail(line, "expected a quoted string");
    return std::string(v.substr(1, v.size() - 2));
}

template <class T>
T as_number(std::string_view v, int line)
{
    T out{};
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        fail(line, "expected a number, got '" + std::string(v) + "'");
    return out;
}

template <class T>
std::vector<T> as_list(std::string_view v, int line, T (*item)(std::string_view, int))
{
    if (v.size() < 2 || v.front() != '[' || v.back() != ']')
        fail(line, "expected an array");
    std::vector<T> out;
    std::string_view body = trim(v.substr(1, v.size() - 2));
    while (!body.empty()) {
        const auto comma = body.find(',');
        out.push_back(item(trim(body.substr(0, comma)), line));
        if (comma == std::string_view::npos)
            break;
        body = trim(body.substr(comma + 1));
    }
    return out;
}

int as_int(std::string_view v, int line) { return as_number<int>(v, line); }
std::string as_quoted(std::string_view v, int line) { return as_string(v, line); }

}  // namespace

void RunConfig::validate() const
{
    static const std::vector<std::string> cases{"case1", "case2", "smooth", "ode-bvp", "ode-ivp"};
    static const std::vector<std::string> solvers{"pcg-sylv", "pcg-kmk", "galerkin", "cn", "dense-oracle"};
    if (std::find(cases.begin(), cases.end(), case_name) == cases.end())
        throw ConfigError("unknown case '" + case_name + "'");
    if (std::find(solvers.begin(), solvers.end(), solver) == solvers.end())
        throw ConfigError("unknown solver '" + solver + "'");
    if (dimension < 1 || dimension > 3)
        throw ConfigError("dimension must be 1, 2 or 3");
    if (refinements.empty())
        throw ConfigError("refinements must not be empty");
    for (std::size_t i = 0; i < refinements.size(); ++i) {
        if (refinements[i] < 2)
            throw ConfigError("refinements must be at least 2");
        if (i > 0 && refinements[i] <= refinements[i - 1])
            throw ConfigError("refinements must be strictly ascending");
    }
    if (!(tolerance > 0.0) || !(inner_tolerance > 0.0) || !(cn_tolerance > 0.0))
        throw ConfigError("tolerances must be positive");
    if (max_iterations < 1 || truncation_rank < 1 || large_space_threshold < 1 || cutoff < 1)
        throw ConfigError("iteration counts, ranks and cutoffs must be positive");
    if (l2_points < 1 || l2_depth < 0)
        throw ConfigError("invalid L2 quadrature settings");
    if (solver == "cn" && is_ode())
        throw ConfigError("solver 'cn' requires a wave problem");
    for (const std::string& o : orders) {
        try {
            parse_ode_pairing(o);
        } catch (const std::invalid_argument&) {
            throw ConfigError("unknown order pairing '" + o + "'");
        }
    }
    if (name.empty() || name.find_first_of("/\\") != std::string::npos)
        throw ConfigError("name must be a plain file stem");
}

RunConfig parse_config(std::string_view text)
{
    RunConfig cfg;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line = 0;
    std::vector<std::string> seen;
    while (std::getline(in, raw)) {
        ++line;
        const std::string_view s = trim(strip_comment(raw));
        if (s.empty())
            continue;
        const auto eq = s.find('=');
        if (eq == std::string_view::npos)
            fail(line, "expected key = value");
        const std::string key(trim(s.substr(0, eq)));
        const std::string_view v = trim(s.substr(eq + 1));
        if (std::find(seen.begin(), seen.end(), key) != seen.end())
            fail(line, "duplicate key '" + key + "'");
        seen.push_back(key);

        if (key == "name")
            cfg.name = as_string(v, line);
        else if (key == "case")
            cfg.case_name = as_string(v, line);
        else if (key == "dimension")
            cfg.dimension = as_number<int>(v, line);
        else if (key == "refinements")
            cfg.refinements = as_list<int>(v, line, as_int);
        else if (key == "solver")
            cfg.solver = as_string(v, line);
        else if (key == "tolerance")
            cfg.tolerance = as_number<double>(v, line);
        else if (key == "inner_tolerance")
            cfg.inner_tolerance = as_number<double>(v, line);
        else if (key == "max_iterations")
            cfg.max_iterations = as_number<int>(v, line);
        else if (key == "truncation_rank")
            cfg.truncation_rank = as_number<int>(v, line);
        else if (key == "large_space_threshold")
            cfg.large_space_threshold = as_number<int>(v, line);
        else if (key == "cn_tolerance")
            cfg.cn_tolerance = as_number<double>(v, line);
        else if (key == "cutoff")
            cfg.cutoff = as_number<int>(v, line);
        else if (key == "l2_points")
            cfg.l2_points = as_number<int>(v, line);
        else if (key == "l2_depth")
            cfg.l2_depth = as_number<int>(v, line);
        else if (key == "orders")
            cfg.orders = as_list<std::string>(v, line, as_quoted);
        else if (key == "output")
            cfg.output = as_string(v, line);
        else if (key == "seed")
            cfg.seed = as_number<std::uint64_t>(v, line);
        else
            fail(line, "unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream f(path);
    if (!f)
        throw ConfigError("cannot read config '" + path.string() + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

}  // namespace stwave::app
