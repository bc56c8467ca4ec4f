#pragma once

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace conetomo {

/// One named residual with its threshold and verdict.
struct CheckEntry {
    std::string name;
    double residual = 0;
    double threshold = 0;
    bool pass = false;
    std::string note;  // "vacuous", "heuristic", "skipped: ...", or empty
};

struct ConsistencyReport {
    std::vector<CheckEntry> entries;
    nlohmann::json provenance;

    CheckEntry& add(const std::string& name, double residual, double threshold,
                    const std::string& note = "") {
        entries.push_back({name, residual, threshold, residual <= threshold, note});
        return entries.back();
    }
    CheckEntry& add_informational(const std::string& name, double residual,
                                  const std::string& note) {
        entries.push_back({name, residual, 0.0, true, note});
        return entries.back();
    }

    bool overall_pass() const {
        return std::all_of(entries.begin(), entries.end(),
                           [](const CheckEntry& e) { return e.pass; });
    }

    const CheckEntry* find(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return &e;
        return nullptr;
    }

    /// Worst failing entry (largest residual/threshold ratio), or null.
    const CheckEntry* worst_failure() const {
        const CheckEntry* worst = nullptr;
        double worst_ratio = 0;
        for (const auto& e : entries) {
            if (e.pass) continue;
            const double ratio = e.threshold > 0 ? e.residual / e.threshold : e.residual;
            if (!worst || ratio > worst_ratio) {
                worst = &e;
                worst_ratio = ratio;
            }
        }
        return worst;
    }

    void merge(const ConsistencyReport& other) {
        entries.insert(entries.end(), other.entries.begin(), other.entries.end());
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["schema_version"] = 1;
        j["overall_pass"] = overall_pass();
        j["entries"] = nlohmann::json::array();
        for (const auto& e : entries) {
            nlohmann::json je;
            je["name"] = e.name;
            je["residual"] = e.residual;
            je["threshold"] = e.threshold;
            je["pass"] = e.pass;
            if (!e.note.empty()) je["note"] = e.note;
            j["entries"].push_back(je);
        }
        if (!provenance.is_null()) j["provenance"] = provenance;
        return j;
    }

    std::string to_csv() const {
        std::ostringstream os;
        os << "name,residual,threshold,pass\n";
        for (const auto& e : entries) {
            os << e.name << ',' << std::setprecision(17) << e.residual << ','
               << e.threshold << ',' << (e.pass ? 1 : 0) << '\n';
        }
        return os.str();
    }

    void print_table(std::ostream& os) const {
        os << std::left << std::setw(36) << "check" << std::setw(14) << "residual"
           << std::setw(14) << "threshold" << "verdict\n";
        for (const auto& e : entries) {
            std::ostringstream res, thr;
            res << std::setprecision(4) << std::scientific << e.residual;
            thr << std::setprecision(2) << std::scientific << e.threshold;
            os << std::left << std::setw(36) << e.name << std::setw(14) << res.str()
               << std::setw(14) << thr.str() << (e.pass ? "pass" : "FAIL");
            if (!e.note.empty()) os << "  [" << e.note << "]";
            os << '\n';
        }
        os << (overall_pass() ? "overall: pass" : "overall: FAIL") << '\n';
    }
};

}  // namespace conetomo
