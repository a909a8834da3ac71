#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "moddrop/evaluation.hpp"

namespace moddrop {

enum class Metric { dsc, ppv, tpr, lfpr, ltpr, vd, corr, sc };

inline constexpr Metric kAllMetrics[] = {Metric::dsc,  Metric::ppv, Metric::tpr,  Metric::lfpr,
                                         Metric::ltpr, Metric::vd,  Metric::corr, Metric::sc};

const char* metric_name(Metric m);   // lower case, as in the CSV header
Metric parse_metric(const std::string& text);  // case-insensitive; throws ConfigError
bool higher_is_better(Metric m);     // false for lfpr and vd

struct ReportRow {
    std::string code;
    double dsc = 0, ppv = 0, tpr = 0, lfpr = 0, ltpr = 0, vd = 0, corr = 0, sc = 0;

    double value(Metric m) const;
};

// Per-configuration metrics, one row per modality code.
struct Report {
    std::string name;
    std::vector<ReportRow> rows;

    const ReportRow* find(const std::string& code) const;
};

inline constexpr const char* kReportHeader = "code,dsc,ppv,tpr,lfpr,ltpr,vd,corr,sc";

Report make_report(const std::vector<ConfigResult>& results, std::string name = {});
std::string format_report_csv(const Report& report);
Report parse_report_csv(const std::string& text, const std::string& origin);
void save_report(const std::filesystem::path& path, const Report& report);
Report load_report(const std::filesystem::path& path, std::string name = {});
std::string format_report_table(const Report& report);

// Rank markers within one row of a side-by-side comparison.
enum class Rank { none, best, second };

// Best and second-best distinct values get markers (all ties share the
// marker); NaN is never ranked. No markers unless two distinct values exist.
std::vector<Rank> rank_values(const std::vector<double>& values, bool higher_better);

// Throws ConfigError when fewer than two reports are given or their code sets differ.
void require_comparable(const std::vector<Report>& reports);

// Side-by-side table per metric (best as **x**, second as _x_), followed by a
// delta summary of every report against the first one.
std::string format_comparison(const std::vector<Report>& reports, const std::vector<Metric>& metrics);

// "A>=B on >=n/total configs by METRIC"; op is one of >=, >, <=, <.
struct Assertion {
    std::string lhs;
    std::string op;
    std::string rhs;
    std::size_t required = 0;
    std::size_t total = 0;
    Metric metric = Metric::dsc;
    std::string text;

    static Assertion parse(const std::string& text);  // throws ConfigError
};

struct AssertionResult {
    bool passed = false;
    std::size_t satisfied = 0;
    std::size_t total = 0;
    std::string message;
};

// Throws ConfigError when a name is unknown or total differs from the code count.
AssertionResult evaluate_assertion(const Assertion& assertion, const std::vector<Report>& reports);

}  // namespace moddrop
