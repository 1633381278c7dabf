#include "sae/io.hpp"

#include "sae/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace sae::io {

using nlohmann::json;

namespace {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        auto field = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
        while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) {
            field.remove_prefix(1);
        }
        while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) {
            field.remove_suffix(1);
        }
        out.emplace_back(field);
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

CsvTable parse_csv(std::string_view text, std::string_view what) {
    CsvTable t;
    std::size_t pos = 0;
    bool have_header = false;
    std::size_t row = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.empty()) {
            continue;
        }
        if (!have_header) {
            t.header = split(line);
            have_header = true;
            continue;
        }
        ++row;
        auto fields = split(line);
        if (fields.size() != t.header.size()) {
            throw ParseError{"expected " + std::to_string(t.header.size()) + " fields, found " +
                                 std::to_string(fields.size()),
                             row};
        }
        t.rows.push_back(std::move(fields));
    }
    if (!have_header) {
        throw ParseError{std::string{what} + " file is empty"};
    }
    return t;
}

double to_double(const std::string &s, std::size_t row, std::string_view column) {
    double v{};
    const auto *first = s.data();
    const auto *last = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) {
        throw ParseError{"column '" + std::string{column} + "': '" + s + "' is not a number", row};
    }
    return v;
}

long to_long(const std::string &s, std::size_t row, std::string_view column) {
    long v{};
    const auto *last = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), last, v);
    if (ec != std::errc{} || ptr != last) {
        throw ParseError{"column '" + std::string{column} + "': '" + s + "' is not an integer", row};
    }
    return v;
}

std::size_t find_column(const CsvTable &t, std::string_view name, std::string_view what) {
    const auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) {
        throw ParseError{std::string{what} + " header lacks column '" + std::string{name} + "'"};
    }
    return static_cast<std::size_t>(it - t.header.begin());
}

std::optional<std::size_t> maybe_column(const CsvTable &t, std::string_view name) {
    const auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - t.header.begin());
}

/// Unit columns shared by the population and sample files.
struct UnitColumns {
    std::size_t unit_id;
    std::size_t area_id;
    std::vector<std::size_t> covariates;
    std::vector<std::string> covariate_names;
    std::size_t y;
    std::optional<std::size_t> y_cont;
    std::size_t size;
};

UnitColumns unit_columns(const CsvTable &t, std::string_view what) {
    if (t.header.size() < 2 || t.header[0] != "unit_id" || t.header[1] != "area_id") {
        throw ParseError{std::string{what} + " header must start with unit_id,area_id"};
    }
    UnitColumns c;
    c.unit_id = 0;
    c.area_id = 1;
    c.y = find_column(t, "y", what);
    c.y_cont = maybe_column(t, "y_cont");
    c.size = find_column(t, "size", what);
    for (std::size_t k = 2; k < c.y; ++k) {
        c.covariates.push_back(k);
        c.covariate_names.push_back(t.header[k]);
    }
    return c;
}

Unit parse_unit(const std::vector<std::string> &f, const UnitColumns &c, std::size_t row) {
    Unit u;
    u.unit_id = to_long(f[c.unit_id], row, "unit_id");
    const long area = to_long(f[c.area_id], row, "area_id");
    if (area < 0 || area > std::numeric_limits<int>::max()) {
        throw ParseError{"unknown area label " + f[c.area_id], row};
    }
    u.area_id = static_cast<int>(area);
    for (std::size_t k = 0; k < c.covariates.size(); ++k) {
        const long level = to_long(f[c.covariates[k]], row, c.covariate_names[k]);
        if (level < 0) {
            throw ParseError{"covariate '" + c.covariate_names[k] + "' has a negative level", row};
        }
        u.covariates.push_back(static_cast<int>(level));
    }
    const long y = to_long(f[c.y], row, "y");
    if (y != 0 && y != 1) {
        throw ParseError{"y must be 0 or 1", row};
    }
    u.y_binary = static_cast<int>(y);
    u.y_continuous = c.y_cont ? to_double(f[*c.y_cont], row, "y_cont") : static_cast<double>(y);
    u.size_value = to_double(f[c.size], row, "size");
    if (!(u.size_value > 0.0) || !std::isfinite(u.size_value)) {
        throw ParseError{"size must be positive, found " + f[c.size], row};
    }
    return u;
}

std::vector<int> infer_levels(std::span<const Unit> units, std::size_t count) {
    std::vector<int> levels(count, 1);
    for (const auto &u : units) {
        for (std::size_t k = 0; k < count; ++k) {
            levels[k] = std::max(levels[k], u.covariates[k] + 1);
        }
    }
    return levels;
}

void unit_header(std::ostringstream &os, std::span<const std::string> names) {
    os << "unit_id,area_id";
    for (const auto &n : names) {
        os << ',' << n;
    }
    os << ",y,y_cont,size";
}

void unit_fields(std::ostringstream &os, const Unit &u) {
    os << u.unit_id << ',' << u.area_id;
    for (int c : u.covariates) {
        os << ',' << c;
    }
    os << ',' << u.y_binary << ',' << format_double(u.y_continuous) << ','
       << format_double(u.size_value);
}

json optional_json(const std::optional<double> &v) {
    return v ? json(*v) : json(nullptr);
}

json generator_json(const GeneratorConfig &c) {
    json covs = json::array();
    for (const auto &cv : c.covariates) {
        covs.push_back({{"name", cv.name}, {"levels", cv.levels}, {"probs", cv.probs}});
    }
    return {{"areas", c.areas},   {"area_sizes", c.area_sizes}, {"area_size", c.area_size},
            {"covariates", covs}, {"beta", c.beta},             {"sigma_u", c.sigma_u},
            {"c0", c.c0},         {"c1", c.c1},                 {"sigma_z", c.sigma_z},
            {"log_size_step", c.log_size_step},                 {"sigma_e", c.sigma_e},
            {"seed", c.seed}};
}

void reject_unknown(const json &j, std::initializer_list<std::string_view> known, std::string_view what) {
    for (const auto &[key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError{"unknown key '" + key + "' in " + std::string{what}};
        }
    }
}

GeneratorConfig generator_from(const json &j) {
    if (!j.is_object()) {
        throw ConfigError{"generator config must be a JSON object"};
    }
    reject_unknown(j,
                   {"areas", "area_sizes", "area_size", "covariates", "beta", "sigma_u", "c0", "c1",
                    "sigma_z", "log_size_step", "sigma_e", "seed"},
                   "generator config");
    GeneratorConfig c;
    c.areas = j.value("areas", c.areas);
    c.area_sizes = j.value("area_sizes", c.area_sizes);
    c.area_size = j.value("area_size", c.area_size);
    if (j.contains("covariates")) {
        c.covariates.clear();
        for (const auto &cv : j.at("covariates")) {
            reject_unknown(cv, {"name", "levels", "probs"}, "covariate spec");
            CovariateSpec s;
            s.name = cv.at("name").get<std::string>();
            s.levels = cv.value("levels", 2);
            s.probs = cv.value("probs", std::vector<double>{});
            c.covariates.push_back(std::move(s));
        }
    }
    c.beta = j.value("beta", c.beta);
    c.sigma_u = j.value("sigma_u", c.sigma_u);
    c.c0 = j.value("c0", c.c0);
    c.c1 = j.value("c1", c.c1);
    c.sigma_z = j.value("sigma_z", c.sigma_z);
    c.log_size_step = j.value("log_size_step", c.log_size_step);
    c.sigma_e = j.value("sigma_e", c.sigma_e);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

json sim_json(const sim::SimConfig &c) {
    json estimators = json::array();
    for (const auto e : c.estimators) {
        estimators.push_back(std::string{sim::to_string(e)});
    }
    json j = {{"generator", generator_json(c.generator)},
              {"n_sample", c.n_sample},
              {"replicates", c.replicates},
              {"estimators", estimators},
              {"mcmc",
               {{"chains", c.mcmc.chains},
                {"warmup", c.mcmc.warmup},
                {"iterations", c.mcmc.iterations},
                {"target_accept", c.mcmc.target_accept}}},
              {"base_seed", c.base_seed},
              {"design", std::string{to_string(c.design)}},
              {"model3_mode", std::string{to_string(c.model3_mode)}},
              {"record_timing", c.record_timing},
              {"workers", c.workers}};
    j["population_csv"] = c.population_csv ? json(*c.population_csv) : json(nullptr);
    return j;
}

json parse_json(std::string_view text, std::string_view what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error &e) {
        throw ConfigError{std::string{what} + " is not valid JSON: " + e.what()};
    }
}

template <class F>
auto json_guard(F &&f) {
    try {
        return f();
    } catch (const json::exception &e) {
        throw ConfigError{std::string{"bad config value: "} + e.what()};
    }
}

} // namespace

std::string format_double(double v) {
    if (std::isnan(v)) {
        return "NA";
    }
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, ptr};
}

std::string read_text(const std::filesystem::path &path) {
    std::ifstream is{path, std::ios::binary};
    if (!is) {
        throw ParseError{"cannot open " + path.string()};
    }
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

void write_text(const std::filesystem::path &path, std::string_view text) {
    std::ofstream os{path, std::ios::binary};
    if (!os) {
        throw std::runtime_error{"cannot write " + path.string()};
    }
    os << text;
    if (!os) {
        throw std::runtime_error{"write failed for " + path.string()};
    }
}

Population parse_population_csv(std::string_view text) {
    if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
        throw ParseError{"no units"};
    }
    const auto t = parse_csv(text, "population");
    const auto cols = unit_columns(t, "population");
    if (t.rows.empty()) {
        throw ParseError{"no units"};
    }
    std::vector<Unit> units;
    units.reserve(t.rows.size());
    std::set<std::int64_t> ids;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        units.push_back(parse_unit(t.rows[r], cols, r + 1));
        if (!ids.insert(units.back().unit_id).second) {
            throw ParseError{"duplicate unit_id " + std::to_string(units.back().unit_id), r + 1};
        }
    }
    auto levels = infer_levels(units, cols.covariates.size());
    return {std::move(units), cols.covariate_names, std::move(levels)};
}

Population read_population_csv(const std::filesystem::path &path) {
    return parse_population_csv(read_text(path));
}

std::string format_population_csv(const Population &pop) {
    std::ostringstream os;
    unit_header(os, pop.covariate_names());
    os << '\n';
    for (const auto &u : pop.units()) {
        unit_fields(os, u);
        os << '\n';
    }
    return os.str();
}

void write_population_csv(const Population &pop, const std::filesystem::path &path) {
    write_text(path, format_population_csv(pop));
}

std::string format_sample_csv(const Population &pop, const SampleDraw &draw) {
    std::ostringstream os;
    unit_header(os, pop.covariate_names());
    os << ",pi,weight\n";
    for (std::size_t j = 0; j < draw.size(); ++j) {
        unit_fields(os, pop[draw.positions[j]]);
        os << ',' << format_double(draw.pi[j]) << ',' << format_double(draw.weights[j]) << '\n';
    }
    return os.str();
}

void write_sample_csv(const Population &pop, const SampleDraw &draw,
                      const std::filesystem::path &path) {
    write_text(path, format_sample_csv(pop, draw));
}

SampleFrame parse_sample_csv(std::string_view text, std::vector<long> area_sizes,
                             std::vector<int> covariate_levels) {
    const auto t = parse_csv(text, "sample");
    const auto cols = unit_columns(t, "sample");
    const auto pi_col = find_column(t, "pi", "sample");
    const auto w_col = find_column(t, "weight", "sample");
    if (t.rows.empty()) {
        throw ParseError{"no sampled units"};
    }
    SampleFrame frame;
    frame.covariate_names = cols.covariate_names;
    int max_area = 0;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        frame.units.push_back(parse_unit(t.rows[r], cols, r + 1));
        const double pi = to_double(t.rows[r][pi_col], r + 1, "pi");
        const double w = to_double(t.rows[r][w_col], r + 1, "weight");
        if (!(pi > 0.0 && pi <= 1.0) || !(w > 0.0) || !std::isfinite(w)) {
            throw ParseError{"need 0 < pi <= 1 and a positive finite weight", r + 1};
        }
        frame.pi.push_back(pi);
        frame.weights.push_back(w);
        max_area = std::max(max_area, frame.units.back().area_id);
    }
    if (covariate_levels.empty()) {
        covariate_levels = infer_levels(frame.units, cols.covariates.size());
    } else if (covariate_levels.size() != cols.covariates.size()) {
        throw ParseError{"sample has " + std::to_string(cols.covariates.size()) +
                         " covariates, the cells file has " + std::to_string(covariate_levels.size())};
    }
    for (std::size_t r = 0; r < frame.units.size(); ++r) {
        for (std::size_t k = 0; k < covariate_levels.size(); ++k) {
            if (frame.units[r].covariates[k] >= covariate_levels[k]) {
                throw ParseError{"covariate '" + cols.covariate_names[k] + "' level not in the cells file",
                                 r + 1};
            }
        }
    }
    frame.covariate_levels = std::move(covariate_levels);
    if (area_sizes.empty()) {
        // No population counts given: each area's own sample size stands in for N_i.
        area_sizes.assign(static_cast<std::size_t>(max_area + 1), 0);
        for (const auto &u : frame.units) {
            ++area_sizes[static_cast<std::size_t>(u.area_id)];
        }
    }
    std::vector<long> counts(area_sizes.size(), 0);
    for (std::size_t r = 0; r < frame.units.size(); ++r) {
        const auto a = static_cast<std::size_t>(frame.units[r].area_id);
        if (a >= area_sizes.size()) {
            throw ParseError{"unknown area label " + std::to_string(a), r + 1};
        }
        ++counts[a];
    }
    for (std::size_t a = 0; a < counts.size(); ++a) {
        if (counts[a] > area_sizes[a]) {
            throw ParseError{"area " + std::to_string(a) + " has more sampled units than N_i"};
        }
    }
    frame.area_sizes = std::move(area_sizes);
    return frame;
}

SampleFrame read_sample_csv(const std::filesystem::path &path, std::vector<long> area_sizes,
                            std::vector<int> covariate_levels) {
    return parse_sample_csv(read_text(path), std::move(area_sizes), std::move(covariate_levels));
}

std::string format_cells_csv(std::span<const PoststratCell> cells,
                             std::span<const std::string> covariate_names) {
    std::ostringstream os;
    os << "area_id";
    for (const auto &n : covariate_names) {
        os << ',' << n;
    }
    os << ",population_count,sample_count,sample_positives\n";
    for (const auto &c : cells) {
        os << c.area_id;
        for (int k : c.covariate_key) {
            os << ',' << k;
        }
        os << ',' << c.population_count << ',' << c.sample_count << ',' << c.sample_positives
           << '\n';
    }
    return os.str();
}

void write_cells_csv(std::span<const PoststratCell> cells,
                     std::span<const std::string> covariate_names,
                     const std::filesystem::path &path) {
    write_text(path, format_cells_csv(cells, covariate_names));
}

CellFile parse_cells_csv(std::string_view text) {
    const auto t = parse_csv(text, "cells");
    if (t.header.empty() || t.header[0] != "area_id") {
        throw ParseError{"cells header must start with area_id"};
    }
    const auto pc = find_column(t, "population_count", "cells");
    const auto sc = find_column(t, "sample_count", "cells");
    const auto sp = maybe_column(t, "sample_positives");
    if (t.rows.empty()) {
        throw ParseError{"no cells"};
    }
    CellFile out;
    for (std::size_t k = 1; k < pc; ++k) {
        out.covariate_names.push_back(t.header[k]);
    }
    out.covariate_levels.assign(out.covariate_names.size(), 1);
    int max_area = 0;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto &f = t.rows[r];
        PoststratCell c;
        const long area = to_long(f[0], r + 1, "area_id");
        if (area < 0) {
            throw ParseError{"unknown area label " + f[0], r + 1};
        }
        c.area_id = static_cast<int>(area);
        for (std::size_t k = 1; k < pc; ++k) {
            const long level = to_long(f[k], r + 1, t.header[k]);
            if (level < 0) {
                throw ParseError{"negative covariate level", r + 1};
            }
            c.covariate_key.push_back(static_cast<int>(level));
            out.covariate_levels[k - 1] = std::max(out.covariate_levels[k - 1], static_cast<int>(level) + 1);
        }
        c.population_count = to_long(f[pc], r + 1, "population_count");
        c.sample_count = to_long(f[sc], r + 1, "sample_count");
        c.sample_positives = sp ? to_long(f[*sp], r + 1, "sample_positives") : 0;
        if (c.sample_count < 0 || c.population_count < c.sample_count || c.sample_positives < 0 ||
            c.sample_positives > c.sample_count) {
            throw ParseError{"need population_count >= sample_count >= sample_positives >= 0", r + 1};
        }
        max_area = std::max(max_area, c.area_id);
        out.cells.push_back(std::move(c));
    }
    out.area_sizes.assign(static_cast<std::size_t>(max_area + 1), 0);
    for (const auto &c : out.cells) {
        out.area_sizes[static_cast<std::size_t>(c.area_id)] += c.population_count;
    }
    for (std::size_t a = 0; a < out.area_sizes.size(); ++a) {
        if (out.area_sizes[a] < 1) {
            throw ParseError{"area " + std::to_string(a) + " has no population in the cells file"};
        }
    }
    return out;
}

CellFile read_cells_csv(const std::filesystem::path &path) {
    return parse_cells_csv(read_text(path));
}

void write_adjacency_csv(const spatial::Adjacency &adj, const std::filesystem::path &path) {
    std::ostringstream os;
    os << "area_i,area_j\n";
    for (const auto &[i, j] : adj.edges()) {
        os << i << ',' << j << '\n';
    }
    write_text(path, os.str());
}

spatial::Adjacency read_adjacency_csv(const std::filesystem::path &path, int area_count) {
    const auto t = parse_csv(read_text(path), "adjacency");
    if (t.header.size() != 2) {
        throw ParseError{"adjacency file needs exactly two columns"};
    }
    std::vector<std::pair<int, int>> edges;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const long i = to_long(t.rows[r][0], r + 1, t.header[0]);
        const long j = to_long(t.rows[r][1], r + 1, t.header[1]);
        if (i < 0 || j < 0 || i >= area_count || j >= area_count) {
            throw ParseError{"area label out of range", r + 1};
        }
        edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
    return {area_count, edges};
}

std::string format_draws_csv(const PosteriorDraws &draws) {
    std::ostringstream os;
    os << "chain,iteration";
    for (const auto &n : draws.names) {
        os << ',' << n;
    }
    os << '\n';
    for (Eigen::Index k = 0; k < draws.draws.rows(); ++k) {
        const int chain = draws.iterations > 0 ? static_cast<int>(k) / draws.iterations : 0;
        const int iter = draws.iterations > 0 ? static_cast<int>(k) % draws.iterations : 0;
        os << chain << ',' << iter;
        for (Eigen::Index c = 0; c < draws.draws.cols(); ++c) {
            os << ',' << format_double(draws.draws(k, c));
        }
        os << '\n';
    }
    return os.str();
}

void write_draws_csv(const PosteriorDraws &draws, const std::filesystem::path &path) {
    write_text(path, format_draws_csv(draws));
}

PosteriorDraws parse_draws_csv(std::string_view text) {
    const auto t = parse_csv(text, "draws");
    if (t.header.size() < 3 || t.header[0] != "chain" || t.header[1] != "iteration") {
        throw ParseError{"draws header must be chain,iteration,<parameters...>"};
    }
    if (t.rows.empty()) {
        throw ParseError{"no draws"};
    }
    std::map<long, std::vector<std::size_t>> by_chain;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        by_chain[to_long(t.rows[r][0], r + 1, "chain")].push_back(r);
    }
    const auto iters = by_chain.begin()->second.size();
    for (const auto &[chain, rows] : by_chain) {
        if (rows.size() != iters) {
            throw ParseError{"chain " + std::to_string(chain) + " has " +
                             std::to_string(rows.size()) + " draws, expected " +
                             std::to_string(iters)};
        }
    }
    PosteriorDraws out;
    out.names.assign(t.header.begin() + 2, t.header.end());
    out.chains = static_cast<int>(by_chain.size());
    out.iterations = static_cast<int>(iters);
    out.draws.resize(static_cast<Eigen::Index>(t.rows.size()),
                     static_cast<Eigen::Index>(out.names.size()));
    Eigen::Index k = 0;
    int chain_index = 0;
    for (const auto &[chain, rows] : by_chain) {
        for (auto r : rows) {
            for (std::size_t c = 0; c < out.names.size(); ++c) {
                out.draws(k, static_cast<Eigen::Index>(c)) =
                    to_double(t.rows[r][c + 2], r + 1, out.names[c]);
            }
            out.chain_ids.push_back(chain_index);
            ++k;
        }
        ++chain_index;
    }
    return out;
}

PosteriorDraws read_draws_csv(const std::filesystem::path &path) {
    return parse_draws_csv(read_text(path));
}

GeneratorConfig generator_config_from_json(std::string_view text) {
    const auto j = parse_json(text, "generator config");
    return json_guard([&] { return generator_from(j); });
}

std::string generator_config_to_json(const GeneratorConfig &config) {
    return generator_json(config).dump(2);
}

std::string_view to_string(models::Model3Mode mode) noexcept {
    return mode == models::Model3Mode::LeonNovelo ? "leon-novelo" : "pfeffermann-sverchkov";
}

models::Model3Mode model3_mode_from_string(std::string_view text) {
    if (text == "pfeffermann-sverchkov" || text == "a") {
        return models::Model3Mode::PfeffermannSverchkov;
    }
    if (text == "leon-novelo" || text == "b") {
        return models::Model3Mode::LeonNovelo;
    }
    throw ConfigError{"unknown model3 mode '" + std::string{text} +
                      "' (expected pfeffermann-sverchkov or leon-novelo)"};
}

sim::SimConfig sim_config_from_json(std::string_view text) {
    auto j = parse_json(text, "simulation config");
    if (j.is_object() && j.contains("schema_version") && j.contains("config")) {
        j = j.at("config");
    }
    if (!j.is_object()) {
        throw ConfigError{"simulation config must be a JSON object"};
    }
    return json_guard([&] {
        reject_unknown(j,
                       {"generator", "population_csv", "n_sample", "replicates", "estimators",
                        "mcmc", "base_seed", "design", "model3_mode", "record_timing", "workers"},
                       "simulation config");
        sim::SimConfig c;
        if (j.contains("generator")) {
            c.generator = generator_from(j.at("generator"));
        }
        if (j.contains("population_csv") && !j.at("population_csv").is_null()) {
            c.population_csv = j.at("population_csv").get<std::string>();
        }
        c.n_sample = j.value("n_sample", c.n_sample);
        c.replicates = j.value("replicates", c.replicates);
        if (j.contains("estimators")) {
            c.estimators.clear();
            for (const auto &e : j.at("estimators")) {
                c.estimators.push_back(sim::estimator_from_string(e.get<std::string>()));
            }
        }
        if (j.contains("mcmc")) {
            const auto &m = j.at("mcmc");
            reject_unknown(m, {"chains", "warmup", "iterations", "target_accept"}, "mcmc budget");
            c.mcmc.chains = m.value("chains", c.mcmc.chains);
            c.mcmc.warmup = m.value("warmup", c.mcmc.warmup);
            c.mcmc.iterations = m.value("iterations", c.mcmc.iterations);
            c.mcmc.target_accept = m.value("target_accept", c.mcmc.target_accept);
        }
        c.base_seed = j.value("base_seed", c.base_seed);
        if (j.contains("design")) {
            c.design = design_tag_from_string(j.at("design").get<std::string>());
        }
        if (j.contains("model3_mode")) {
            c.model3_mode = model3_mode_from_string(j.at("model3_mode").get<std::string>());
        }
        c.record_timing = j.value("record_timing", c.record_timing);
        c.workers = j.value("workers", c.workers);
        c.validate();
        return c;
    });
}

std::string sim_config_to_json(const sim::SimConfig &config) {
    return sim_json(config).dump(2);
}

std::string sim_manifest_json(const sim::SimReport &report) {
    json j = {{"schema_version", 1},
              {"config", sim_json(report.config)},
              {"seeds", report.seeds},
              {"warnings", report.warnings},
              {"files", {"summary.csv", "per_area.csv", "raw_estimates.csv"}}};
    return j.dump(2);
}

std::string estimates_json(const EstimateSet &set) {
    auto record = [](const EstimateRecord &r) {
        return json{{"area_id", r.area_id},
                    {"estimate", optional_json(r.estimate)},
                    {"se", optional_json(r.se)},
                    {"lo95", optional_json(r.lo95)},
                    {"hi95", optional_json(r.hi95)}};
    };
    json areas = json::array();
    for (const auto &r : set.areas) {
        areas.push_back(record(r));
    }
    json j = {{"model", set.model}, {"areas", areas}, {"warnings", set.warnings}};
    if (set.state) {
        auto s = record(*set.state);
        s.erase("area_id");
        j["state"] = s;
    }
    return j.dump(2);
}

std::string estimates_csv(const EstimateSet &set) {
    auto field = [](const std::optional<double> &v) { return v ? format_double(*v) : "NA"; };
    std::ostringstream os;
    os << "area_id,estimate,se,lo95,hi95\n";
    for (const auto &r : set.areas) {
        os << r.area_id << ',' << field(r.estimate) << ',' << field(r.se) << ',' << field(r.lo95)
           << ',' << field(r.hi95) << '\n';
    }
    return os.str();
}

} // namespace sae::io
