#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace nvmix::cli {

enum ExitCode { kOk = 0, kFailure = 1, kDomain = 2, kNotConverged = 3 };

// Runs the command line given without the program name. JSON goes to out,
// diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Comma-separated numeric table; a first row with non-numeric fields is a
// header. Blank lines and lines starting with '#' are skipped. Errors name
// the offending row and column (1-based, counting physical lines).
struct Table {
  std::vector<std::string> header;
  Eigen::MatrixXd values;
};
Table parse_csv(std::istream& in, const std::string& source);
Table read_csv(const std::string& path);

// "1,2.5,-inf" -> {1, 2.5, -inf}
std::vector<double> parse_list(const std::string& text);

// Shortest decimal text that reads back as the same double.
std::string format_double(double x);

}  // namespace nvmix::cli
