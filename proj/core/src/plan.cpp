#include "geest/plan.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "geest/error.hpp"

namespace geest {

namespace {

template <class T>
void write_list(std::ostream& out, const std::vector<T>& v) {
    for (std::size_t k = 0; k < v.size(); ++k) out << (k ? "," : "") << v[k];
}

std::vector<std::size_t> parse_list(const std::string& s) {
    std::vector<std::size_t> out;
    std::size_t start = 0;
    if (s.empty()) return out;
    while (start <= s.size()) {
        auto end = s.find(',', start);
        if (end == std::string::npos) end = s.size();
        std::size_t v = 0;
        auto [ptr, ec] = std::from_chars(s.data() + start, s.data() + end, v);
        if (ec != std::errc() || ptr != s.data() + end) throw Error("malformed index list in plan: '" + s + "'");
        out.push_back(v);
        start = end + 1;
    }
    return out;
}

std::map<std::string, std::string> parse_kv(std::istringstream& ss) {
    std::map<std::string, std::string> kv;
    std::string tok;
    while (ss >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) throw Error("malformed plan header token '" + tok + "'");
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return kv;
}

} // namespace

void write_plan(std::ostream& out, const ResamplingPlan& plan) {
    out << "#plan scheme=" << plan.scheme << " seed=" << plan.seed << " n=" << plan.n
        << " partition=" << (plan.partition ? 1 : 0) << '\n';
    for (const auto& [k, v] : plan.params) out << "#param " << k << '=' << v << '\n';
    out << "#repeat=";
    write_list(out, plan.repeat);
    out << '\n';
    for (std::size_t j = 0; j < plan.splits.size(); ++j) {
        out << "split " << j + 1 << ": train=";
        write_list(out, plan.splits[j].train);
        out << " test=";
        write_list(out, plan.splits[j].test);
        out << '\n';
    }
}

void write_plan(const std::string& path, const ResamplingPlan& plan) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write plan file '" + path + "'");
    write_plan(out, plan);
}

ResamplingPlan read_plan(std::istream& in) {
    ResamplingPlan plan;
    bool have_header = false;
    std::string line;
    std::vector<std::size_t> repeats;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.rfind("#plan ", 0) == 0) {
            std::istringstream ss(line.substr(6));
            auto kv = parse_kv(ss);
            plan.scheme = kv["scheme"];
            plan.seed = std::stoull(kv.at("seed"));
            plan.n = std::stoull(kv.at("n"));
            plan.partition = kv["partition"] == "1";
            have_header = true;
        } else if (line.rfind("#param ", 0) == 0) {
            auto body = line.substr(7);
            auto eq = body.find('=');
            if (eq == std::string::npos) throw Error("malformed plan parameter line '" + line + "'");
            plan.params[body.substr(0, eq)] = body.substr(eq + 1);
        } else if (line.rfind("#repeat=", 0) == 0) {
            repeats = parse_list(line.substr(8));
        } else if (line.front() == '#') {
            continue;
        } else if (line.rfind("split ", 0) == 0) {
            auto colon = line.find(':');
            auto tr = line.find(" train=");
            auto te = line.find(" test=");
            if (colon == std::string::npos || tr == std::string::npos || te == std::string::npos || te < tr)
                throw Error("malformed split line '" + line + "'");
            auto j = std::stoull(line.substr(6, colon - 6));
            if (j != plan.splits.size() + 1) throw Error("split lines out of order at split " + std::to_string(j));
            Split s;
            s.train = parse_list(line.substr(tr + 7, te - tr - 7));
            s.test = parse_list(line.substr(te + 6));
            plan.splits.push_back(std::move(s));
        } else {
            throw Error("unrecognized plan line '" + line + "'");
        }
    }
    if (!have_header) throw Error("plan file lacks a '#plan' header");
    if (repeats.empty()) repeats.assign(plan.splits.size(), 0);
    if (repeats.size() != plan.splits.size()) throw Error("plan repeat list length does not match split count");
    for (auto r : repeats) plan.repeat.push_back(static_cast<int>(r));
    return plan;
}

ResamplingPlan read_plan_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open plan file '" + path + "'");
    return read_plan(in);
}

void check_plan(const ResamplingPlan& plan, std::size_t n) {
    if (plan.splits.empty()) throw Error("plan has no splits");
    if (plan.repeat.size() != plan.splits.size()) throw Error("plan repeat list length does not match split count");
    std::map<int, std::vector<int>> cover;
    std::vector<char> seen(n);
    for (std::size_t j = 0; j < plan.splits.size(); ++j) {
        const auto& s = plan.splits[j];
        const auto tag = "split " + std::to_string(j + 1) + ": ";
        if (s.train.empty() || s.test.empty()) throw Error(tag + "empty train or test set");
        std::fill(seen.begin(), seen.end(), 0);
        for (auto i : s.train) {
            if (i >= n) throw Error(tag + "train index " + std::to_string(i) + " out of range for n=" + std::to_string(n));
            if (seen[i]) throw Error(tag + "duplicate train index");
            seen[i] = 1;
        }
        for (auto i : s.test) {
            if (i >= n) throw Error(tag + "test index " + std::to_string(i) + " out of range for n=" + std::to_string(n));
            if (seen[i] == 1) throw Error(tag + "index " + std::to_string(i) + " in both train and test");
            if (seen[i] == 2) throw Error(tag + "duplicate test index");
            seen[i] = 2;
        }
        if (plan.partition) {
            auto& c = cover[plan.repeat[j]];
            if (c.empty()) c.assign(n, 0);
            for (auto i : s.test) ++c[i];
        }
    }
    for (const auto& [r, c] : cover) {
        for (std::size_t i = 0; i < n; ++i)
            if (c[i] != 1)
                throw Error("repeat " + std::to_string(r) + ": row " + std::to_string(i) + " appears in " +
                            std::to_string(c[i]) + " test sets");
    }
}

} // namespace geest
