#include "geest/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "geest/error.hpp"

namespace geest {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_real(const std::string& s, const std::string& column, std::size_t row) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first < last && *first == ' ') ++first;
    if (first < last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v))
        throw Error("non-finite or unparsable value '" + s + "' in column '" + column + "' (row " +
                    std::to_string(row + 1) + ")");
    return v;
}

std::int64_t parse_int(const std::string& s, const std::string& column, std::size_t row) {
    double v = parse_real(s, column, row);
    if (v != std::floor(v)) throw Error("non-integer id '" + s + "' in column '" + column + "'");
    return static_cast<std::int64_t>(v);
}

std::string format_real(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

} // namespace

Role parse_role(const std::string& s) {
    static const std::map<std::string, Role> table{
        {"feature", Role::feature},       {"label", Role::label},     {"label_real", Role::label},
        {"label_class", Role::label},     {"label_hier", Role::label}, {"cluster", Role::cluster},
        {"coord_x", Role::coord_x},       {"coord_y", Role::coord_y}, {"unit", Role::unit},
        {"pi", Role::pi},                 {"time", Role::time},       {"season", Role::season},
        {"ignore", Role::ignore}};
    auto it = table.find(s);
    if (it == table.end()) throw Error("unknown column role '" + s + "'");
    return it->second;
}

std::string to_string(Role r) {
    switch (r) {
    case Role::feature: return "feature";
    case Role::label: return "label";
    case Role::cluster: return "cluster";
    case Role::coord_x: return "coord_x";
    case Role::coord_y: return "coord_y";
    case Role::unit: return "unit";
    case Role::pi: return "pi";
    case Role::time: return "time";
    case Role::season: return "season";
    case Role::ignore: return "ignore";
    }
    return "?";
}

std::string to_string(LabelKind k) {
    switch (k) {
    case LabelKind::real: return "label";
    case LabelKind::class_id: return "label_class";
    case LabelKind::hierarchical: return "label_hier";
    }
    return "?";
}

int season_of(double t, int bins) {
    if (bins < 1) throw Error("season bins must be positive");
    auto s = static_cast<int>(std::floor(t * bins)) + 1;
    return std::clamp(s, 1, bins);
}

void Dataset::validate() const {
    const std::size_t rows = n();
    if (rows < 1) throw Error("dataset must have at least one row");
    if (p() < 1) throw Error("dataset must have at least one feature");
    if (!feature_names.empty() && feature_names.size() != p()) throw Error("feature name count does not match p");
    for (double v : features.data())
        if (!std::isfinite(v)) throw Error("non-finite feature value");

    auto need = [&](std::size_t m, const char* what) {
        if (m != rows) throw Error(std::string("column '") + what + "' has " + std::to_string(m) + " entries, expected " +
                                   std::to_string(rows));
    };
    switch (label_kind) {
    case LabelKind::real:
        need(y.size(), "label");
        for (double v : y)
            if (!std::isfinite(v)) throw Error("non-finite label value");
        break;
    case LabelKind::class_id:
        need(classes.size(), "label");
        for (int c : classes)
            if (c < 0 || (!class_names.empty() && static_cast<std::size_t>(c) >= class_names.size()))
                throw Error("class id out of range");
        break;
    case LabelKind::hierarchical:
        need(classes.size(), "label");
        if (!tree) throw Error("hierarchical labels require a category tree");
        for (int c : classes)
            if (!tree->contains(c) || c == CategoryTree::root || !tree->is_leaf(c))
                throw Error("hierarchical label does not resolve to a leaf of the category tree");
        break;
    }
    if (cluster_id) need(cluster_id->size(), "cluster");
    if (unit_id) need(unit_id->size(), "unit");
    if (coords) {
        need(coords->rows(), "coords");
        if (coords->cols() != 2) throw Error("coordinates must have two columns");
        for (double v : coords->data())
            if (!std::isfinite(v)) throw Error("non-finite coordinate");
    }
    if (time) {
        need(time->size(), "time");
        for (double v : *time)
            if (!std::isfinite(v)) throw Error("non-finite time value");
    }
    if (season) {
        need(season->size(), "season");
        for (int s : *season)
            if (s < 1) throw Error("season index must be >= 1");
    }
    if (population_size && *population_size < 1) throw Error("population size must be positive");
    if (population_size && static_cast<std::size_t>(*population_size) < rows)
        throw Error("population size " + std::to_string(*population_size) + " is smaller than the sample size " +
                    std::to_string(rows));
    if (inclusion_prob) {
        need(inclusion_prob->size(), "pi");
        double sum = 0.0;
        for (double v : *inclusion_prob) {
            if (!(v > 0.0 && v <= 1.0)) throw Error("inclusion probability out of range (0,1]");
            sum += v;
        }
        if (population_size && sum > static_cast<double>(*population_size) * (1.0 + 1e-12))
            throw Error("sum of inclusion probabilities exceeds the population size");
    }
}

Dataset read_dataset(std::istream& in, const Schema& schema) {
    std::string line;
    std::optional<std::int64_t> pop = schema.population_size;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.front() == '#') {
            const std::string key = "#population_size=";
            if (line.rfind(key, 0) == 0 && !pop) pop = parse_int(line.substr(key.size()), "population_size", 0);
            continue;
        }
        header = split_csv(line);
        break;
    }
    if (header.empty()) throw Error("missing CSV header");

    // Resolve roles per file column.
    std::map<std::string, Role> role_of;
    for (const auto& [name, role] : schema.columns) {
        if (role_of.contains(name)) throw Error("duplicate role assignment for column '" + name + "'");
        role_of.emplace(name, role);
    }
    std::map<Role, int> single_count;
    std::vector<Role> col_role(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        auto it = role_of.find(header[c]);
        if (it == role_of.end()) throw Error("column '" + header[c] + "' has no role in the schema");
        col_role[c] = it->second;
        if (it->second != Role::feature && it->second != Role::ignore) ++single_count[it->second];
    }
    for (const auto& [name, role] : schema.columns) {
        if (std::find(header.begin(), header.end(), name) == header.end())
            throw Error("schema column '" + name + "' is missing from the file");
    }
    for (const auto& [role, count] : single_count)
        if (count > 1) throw Error("role '" + to_string(role) + "' assigned to more than one column");
    if (!single_count.contains(Role::label)) throw Error("schema assigns no label column");
    if (single_count.contains(Role::coord_x) != single_count.contains(Role::coord_y))
        throw Error("coordinates need both coord_x and coord_y columns");

    Dataset d;
    d.label_kind = schema.label_kind;
    d.tree = schema.tree;
    d.population_size = pop;
    if (d.label_kind == LabelKind::hierarchical && !d.tree) throw Error("hierarchical labels require a category tree");
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (col_role[c] == Role::feature) d.feature_names.push_back(header[c]);
        if (col_role[c] == Role::label) d.label_name = header[c];
    }
    if (d.feature_names.empty()) throw Error("schema assigns no feature columns");

    std::vector<double> feat;
    std::vector<double> cx, cy, pis, times;
    std::vector<std::int64_t> clusters, units;
    std::vector<int> seasons;
    std::map<std::string, int> class_index;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        auto cells = split_csv(line);
        if (cells.size() != header.size())
            throw Error("row " + std::to_string(row + 1) + " has " + std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(header.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto& cell = cells[c];
            const auto& name = header[c];
            switch (col_role[c]) {
            case Role::feature: feat.push_back(parse_real(cell, name, row)); break;
            case Role::label:
                if (d.label_kind == LabelKind::real) {
                    d.y.push_back(parse_real(cell, name, row));
                } else if (d.label_kind == LabelKind::class_id) {
                    auto [it, inserted] = class_index.emplace(cell, static_cast<int>(class_index.size()));
                    d.classes.push_back(it->second);
                } else {
                    NodeId node = d.tree->try_find(cell);
                    if (node < 0 || !d.tree->is_leaf(node))
                        throw Error("unresolved hierarchical label '" + cell + "' (row " + std::to_string(row + 1) + ")");
                    d.classes.push_back(node);
                }
                break;
            case Role::cluster: clusters.push_back(parse_int(cell, name, row)); break;
            case Role::coord_x: cx.push_back(parse_real(cell, name, row)); break;
            case Role::coord_y: cy.push_back(parse_real(cell, name, row)); break;
            case Role::unit: units.push_back(parse_int(cell, name, row)); break;
            case Role::pi: {
                double v = parse_real(cell, name, row);
                if (!(v > 0.0 && v <= 1.0))
                    throw Error("inclusion probability out of range (0,1]: '" + cell + "' (row " + std::to_string(row + 1) + ")");
                pis.push_back(v);
                break;
            }
            case Role::time: times.push_back(parse_real(cell, name, row)); break;
            case Role::season: seasons.push_back(static_cast<int>(parse_int(cell, name, row))); break;
            case Role::ignore: break;
            }
        }
        ++row;
    }
    if (row == 0) throw Error("dataset has no rows");

    d.features = Matrix(row, d.feature_names.size(), std::move(feat));
    if (d.label_kind == LabelKind::class_id) {
        // Class ids follow sorted class names so they do not depend on row order.
        std::vector<std::string> names;
        for (const auto& [name, id] : class_index) names.push_back(name);
        std::vector<int> remap(names.size());
        for (std::size_t k = 0; k < names.size(); ++k) remap[static_cast<std::size_t>(class_index[names[k]])] = static_cast<int>(k);
        for (int& c : d.classes) c = remap[static_cast<std::size_t>(c)];
        d.class_names = std::move(names);
    }
    if (!clusters.empty()) d.cluster_id = std::move(clusters);
    if (!units.empty()) d.unit_id = std::move(units);
    if (!cx.empty()) {
        Matrix m(row, 2);
        for (std::size_t i = 0; i < row; ++i) {
            m(i, 0) = cx[i];
            m(i, 1) = cy[i];
        }
        d.coords = std::move(m);
    }
    if (!pis.empty()) d.inclusion_prob = std::move(pis);
    if (!times.empty()) d.time = std::move(times);
    if (!seasons.empty()) {
        d.season = std::move(seasons);
    } else if (d.time) {
        std::vector<int> derived(row);
        for (std::size_t i = 0; i < row; ++i) derived[i] = season_of((*d.time)[i], schema.season_bins);
        d.season = std::move(derived);
    }
    d.validate();
    return d;
}

Dataset load_dataset(const std::string& path, const Schema& schema) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open data file '" + path + "'");
    return read_dataset(in, schema);
}

Dataset read_dataset(std::istream& in, std::shared_ptr<const CategoryTree> tree) {
    // Peek the header to build the schema, then parse the buffered text.
    std::stringstream buffer;
    buffer << in.rdbuf();
    Schema schema;
    schema.tree = std::move(tree);
    std::string line;
    while (std::getline(buffer, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        for (const auto& token : split_csv(line)) {
            auto colon = token.rfind(':');
            if (colon == std::string::npos) throw Error("header token '" + token + "' lacks a ':role' suffix");
            auto name = token.substr(0, colon);
            auto role_name = token.substr(colon + 1);
            Role role = parse_role(role_name);
            if (role_name == "label_class") schema.label_kind = LabelKind::class_id;
            if (role_name == "label_hier") schema.label_kind = LabelKind::hierarchical;
            schema.columns.emplace_back(token, role);
            (void)name;
        }
        break;
    }
    buffer.clear();
    buffer.seekg(0);
    Dataset d = read_dataset(buffer, schema);
    // Strip role suffixes from the recorded names.
    auto strip = [](std::string s) { return s.substr(0, s.rfind(':')); };
    for (auto& f : d.feature_names) f = strip(f);
    d.label_name = strip(d.label_name);
    return d;
}

Dataset load_dataset(const std::string& path, std::shared_ptr<const CategoryTree> tree) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open data file '" + path + "'");
    return read_dataset(in, std::move(tree));
}

void write_dataset(std::ostream& out, const Dataset& d) {
    d.validate();
    if (d.population_size) out << "#population_size=" << *d.population_size << '\n';
    std::vector<std::string> head;
    for (std::size_t j = 0; j < d.p(); ++j)
        head.push_back((d.feature_names.empty() ? "x" + std::to_string(j + 1) : d.feature_names[j]) + ":feature");
    head.push_back(d.label_name + ":" + to_string(d.label_kind));
    if (d.cluster_id) head.emplace_back("cluster:cluster");
    if (d.coords) {
        head.emplace_back("coord_x:coord_x");
        head.emplace_back("coord_y:coord_y");
    }
    if (d.unit_id) head.emplace_back("unit:unit");
    if (d.inclusion_prob) head.emplace_back("pi:pi");
    if (d.time) head.emplace_back("t:time");
    if (d.season) head.emplace_back("season:season");
    for (std::size_t k = 0; k < head.size(); ++k) out << (k ? "," : "") << head[k];
    out << '\n';

    for (std::size_t i = 0; i < d.n(); ++i) {
        for (std::size_t j = 0; j < d.p(); ++j) out << (j ? "," : "") << format_real(d.features(i, j));
        out << ',';
        switch (d.label_kind) {
        case LabelKind::real: out << format_real(d.y[i]); break;
        case LabelKind::class_id:
            if (d.class_names.empty()) out << d.classes[i];
            else out << d.class_names[static_cast<std::size_t>(d.classes[i])];
            break;
        case LabelKind::hierarchical: out << d.tree->label(d.classes[i]); break;
        }
        if (d.cluster_id) out << ',' << (*d.cluster_id)[i];
        if (d.coords) out << ',' << format_real((*d.coords)(i, 0)) << ',' << format_real((*d.coords)(i, 1));
        if (d.unit_id) out << ',' << (*d.unit_id)[i];
        if (d.inclusion_prob) out << ',' << format_real((*d.inclusion_prob)[i]);
        if (d.time) out << ',' << format_real((*d.time)[i]);
        if (d.season) out << ',' << (*d.season)[i];
        out << '\n';
    }
}

void write_dataset(const std::string& path, const Dataset& d) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write data file '" + path + "'");
    write_dataset(out, d);
}

Dataset subset(const Dataset& d, std::span<const std::size_t> idx) {
    if (idx.empty()) throw Error("subset needs a nonempty index list");
    for (std::size_t i : idx)
        if (i >= d.n()) throw Error("subset index " + std::to_string(i) + " out of range for n=" + std::to_string(d.n()));

    auto pick = [&](const auto& v) {
        std::remove_cvref_t<decltype(v)> out;
        out.reserve(idx.size());
        for (std::size_t i : idx) out.push_back(v[i]);
        return out;
    };
    Dataset out;
    out.features = d.features.select_rows(idx);
    out.feature_names = d.feature_names;
    out.label_kind = d.label_kind;
    out.label_name = d.label_name;
    if (!d.y.empty()) out.y = pick(d.y);
    if (!d.classes.empty()) out.classes = pick(d.classes);
    out.class_names = d.class_names;
    out.tree = d.tree;
    if (d.cluster_id) out.cluster_id = pick(*d.cluster_id);
    if (d.coords) out.coords = d.coords->select_rows(idx);
    if (d.unit_id) out.unit_id = pick(*d.unit_id);
    if (d.inclusion_prob) out.inclusion_prob = pick(*d.inclusion_prob);
    if (d.time) out.time = pick(*d.time);
    if (d.season) out.season = pick(*d.season);
    out.population_size = d.population_size;
    return out;
}

} // namespace geest
