#include "moddrop/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <regex>
#include <set>
#include <sstream>

#include "moddrop/error.hpp"

namespace moddrop {

namespace {

std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_value(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

}  // namespace

const char* metric_name(Metric m) {
    switch (m) {
        case Metric::dsc: return "dsc";
        case Metric::ppv: return "ppv";
        case Metric::tpr: return "tpr";
        case Metric::lfpr: return "lfpr";
        case Metric::ltpr: return "ltpr";
        case Metric::vd: return "vd";
        case Metric::corr: return "corr";
        case Metric::sc: return "sc";
    }
    return "?";
}

Metric parse_metric(const std::string& text) {
    std::string lower = text;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (Metric m : kAllMetrics) {
        if (lower == metric_name(m)) return m;
    }
    throw ConfigError("unknown metric '" + text + "' (expected dsc, ppv, tpr, lfpr, ltpr, vd, corr or sc)");
}

bool higher_is_better(Metric m) { return m != Metric::lfpr && m != Metric::vd; }

double ReportRow::value(Metric m) const {
    switch (m) {
        case Metric::dsc: return dsc;
        case Metric::ppv: return ppv;
        case Metric::tpr: return tpr;
        case Metric::lfpr: return lfpr;
        case Metric::ltpr: return ltpr;
        case Metric::vd: return vd;
        case Metric::corr: return corr;
        case Metric::sc: return sc;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

const ReportRow* Report::find(const std::string& code) const {
    for (const ReportRow& r : rows) {
        if (r.code == code) return &r;
    }
    return nullptr;
}

Report make_report(const std::vector<ConfigResult>& results, std::string name) {
    Report report;
    report.name = std::move(name);
    for (const ConfigResult& c : results) {
        const MetricsReport& m = c.report;
        report.rows.push_back({c.code.str(), m.dsc, m.ppv, m.tpr, m.lfpr, m.ltpr, m.vd, m.corr, m.sc});
    }
    return report;
}

std::string format_report_csv(const Report& report) {
    std::string out = std::string(kReportHeader) + "\n";
    for (const ReportRow& r : report.rows) {
        out += r.code;
        for (Metric m : kAllMetrics) out += "," + format_value(r.value(m));
        out += "\n";
    }
    return out;
}

Report parse_report_csv(const std::string& text, const std::string& origin) {
    std::istringstream is(text);
    std::string line;
    std::uint64_t offset = 0;
    if (!std::getline(is, line) || line != kReportHeader) {
        throw FormatError(origin + ": expected report header '" + kReportHeader + "'", 0);
    }
    offset += line.size() + 1;
    Report report;
    while (std::getline(is, line)) {
        const std::uint64_t at = offset;
        offset += line.size() + 1;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != 9) {
            throw FormatError(origin + ": report row needs 9 fields, got " + std::to_string(cells.size()), at);
        }
        ReportRow row;
        row.code = cells[0];
        double* slots[] = {&row.dsc, &row.ppv, &row.tpr, &row.lfpr, &row.ltpr, &row.vd, &row.corr, &row.sc};
        for (std::size_t i = 0; i < 8; ++i) {
            try {
                std::size_t used = 0;
                *slots[i] = std::stod(cells[i + 1], &used);
                if (used != cells[i + 1].size()) throw std::invalid_argument("trailing");
            } catch (const std::logic_error&) {
                throw FormatError(origin + ": bad number '" + cells[i + 1] + "'", at);
            }
        }
        if (report.find(row.code)) {
            throw FormatError(origin + ": duplicate code " + row.code, at);
        }
        report.rows.push_back(row);
    }
    return report;
}

void save_report(const std::filesystem::path& path, const Report& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write report " + path.string());
    }
    out << format_report_csv(report);
}

Report load_report(const std::filesystem::path& path, std::string name) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open report " + path.string());
    }
    std::ostringstream os;
    os << in.rdbuf();
    Report r = parse_report_csv(os.str(), path.string());
    r.name = name.empty() ? path.stem().string() : std::move(name);
    return r;
}

std::string format_report_table(const Report& report) {
    std::ostringstream os;
    os << pad("code", 6);
    for (Metric m : kAllMetrics) os << pad(metric_name(m), 9);
    os << "\n";
    for (const ReportRow& r : report.rows) {
        os << pad(r.code, 6);
        for (Metric m : kAllMetrics) os << pad(short_value(r.value(m)), 9);
        os << "\n";
    }
    return os.str();
}

std::vector<Rank> rank_values(const std::vector<double>& values, bool higher_better) {
    std::vector<Rank> ranks(values.size(), Rank::none);
    std::vector<double> distinct;
    for (double v : values) {
        if (!std::isnan(v)) distinct.push_back(v);
    }
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) return ranks;
    if (higher_better) std::reverse(distinct.begin(), distinct.end());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (std::isnan(values[i])) continue;
        if (values[i] == distinct[0]) {
            ranks[i] = Rank::best;
        } else if (values[i] == distinct[1]) {
            ranks[i] = Rank::second;
        }
    }
    return ranks;
}

void require_comparable(const std::vector<Report>& reports) {
    if (reports.size() < 2) {
        throw ConfigError("compare needs at least two reports");
    }
    std::set<std::string> names;
    for (const Report& r : reports) {
        if (!names.insert(r.name).second) {
            throw ConfigError("report name '" + r.name + "' given twice");
        }
    }
    const auto codes = [](const Report& r) {
        std::set<std::string> s;
        for (const ReportRow& row : r.rows) s.insert(row.code);
        return s;
    };
    const std::set<std::string> first = codes(reports.front());
    for (const Report& r : reports) {
        if (codes(r) != first || r.rows.size() != first.size()) {
            throw ConfigError("reports '" + reports.front().name + "' and '" + r.name +
                              "' cover different configuration sets");
        }
    }
}

std::string format_comparison(const std::vector<Report>& reports, const std::vector<Metric>& metrics) {
    require_comparable(reports);
    std::ostringstream os;
    std::size_t width = 12;
    for (const Report& r : reports) width = std::max(width, r.name.size() + 2);
    for (Metric m : metrics) {
        os << metric_name(m) << (higher_is_better(m) ? " (higher is better)" : " (lower is better)") << "\n";
        os << pad("code", 6);
        for (const Report& r : reports) os << pad(r.name, width);
        os << "\n";
        for (const ReportRow& base : reports.front().rows) {
            std::vector<double> values;
            for (const Report& r : reports) values.push_back(r.find(base.code)->value(m));
            const std::vector<Rank> ranks = rank_values(values, higher_is_better(m));
            os << pad(base.code, 6);
            for (std::size_t i = 0; i < values.size(); ++i) {
                std::string cell = short_value(values[i]);
                if (ranks[i] == Rank::best) cell = "**" + cell + "**";
                if (ranks[i] == Rank::second) cell = "_" + cell + "_";
                os << pad(cell, width);
            }
            os << "\n";
        }
        os << "\n";
    }
    os << "deltas against " << reports.front().name << "\n";
    for (std::size_t i = 1; i < reports.size(); ++i) {
        os << "  " << reports[i].name << ":";
        for (Metric m : metrics) {
            double sum = 0.0;
            std::size_t n = 0;
            std::size_t better = 0;
            for (const ReportRow& base : reports.front().rows) {
                const double a = reports[i].find(base.code)->value(m);
                const double b = base.value(m);
                if (std::isnan(a) || std::isnan(b)) continue;
                sum += a - b;
                ++n;
                if (higher_is_better(m) ? a > b : a < b) ++better;
            }
            char buf[96];
            std::snprintf(buf, sizeof buf, " %s %+.4f (better on %zu/%zu)", metric_name(m),
                          n ? sum / static_cast<double>(n) : 0.0, better, n);
            os << buf;
        }
        os << "\n";
    }
    return os.str();
}

Assertion Assertion::parse(const std::string& text) {
    static const std::regex pattern(
        R"(^\s*(\S+?)\s*(>=|<=|>|<)\s*(\S+)\s+on\s+>=\s*(\d+)\s*/\s*(\d+)\s+configs?\s+by\s+(\w+)\s*$)",
        std::regex::icase);
    std::smatch m;
    if (!std::regex_match(text, m, pattern)) {
        throw ConfigError("cannot parse assertion '" + text + "' (expected e.g. \"MD++>=MD on >=12/15 configs by DSC\")");
    }
    Assertion a;
    a.lhs = m[1];
    a.op = m[2];
    a.rhs = m[3];
    a.required = std::stoul(m[4]);
    a.total = std::stoul(m[5]);
    a.metric = parse_metric(m[6]);
    a.text = text;
    if (a.required > a.total) {
        throw ConfigError("assertion '" + text + "' requires more configurations than it counts");
    }
    return a;
}

AssertionResult evaluate_assertion(const Assertion& assertion, const std::vector<Report>& reports) {
    const auto lookup = [&](const std::string& name) -> const Report& {
        for (const Report& r : reports) {
            if (r.name == name) return r;
        }
        throw ConfigError("assertion '" + assertion.text + "' names unknown report '" + name + "'");
    };
    const Report& lhs = lookup(assertion.lhs);
    const Report& rhs = lookup(assertion.rhs);
    if (lhs.rows.size() != assertion.total || rhs.rows.size() != assertion.total) {
        throw ConfigError("assertion '" + assertion.text + "' counts " + std::to_string(assertion.total) +
                          " configurations but the reports have " + std::to_string(lhs.rows.size()));
    }
    AssertionResult result;
    result.total = assertion.total;
    for (const ReportRow& row : lhs.rows) {
        const ReportRow* other = rhs.find(row.code);
        if (!other) {
            throw ConfigError("report '" + rhs.name + "' lacks configuration " + row.code);
        }
        const double a = row.value(assertion.metric);
        const double b = other->value(assertion.metric);
        const bool ok = assertion.op == ">=" ? a >= b : assertion.op == ">" ? a > b : assertion.op == "<=" ? a <= b : a < b;
        if (ok) ++result.satisfied;
    }
    result.passed = result.satisfied >= assertion.required;
    result.message = std::string(result.passed ? "PASS" : "FAIL") + ": " + assertion.text + " (satisfied on " +
                     std::to_string(result.satisfied) + "/" + std::to_string(result.total) + ")";
    return result;
}

}  // namespace moddrop
