#ifndef GEXP_CLI_HPP
#define GEXP_CLI_HPP

#include "gexp/config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace gexp {

enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 1,
    kExitNumerical = 2,
    kExitBreach = 3,
};

inline const std::vector<std::string> kSuites{"bdg", "apriori", "difference", "tower", "doob", "mollify"};

// Each command writes into config.output_dir and logs to `log`.
// price.json: value, dual lower bound, gap, convergence table.
int cmd_price(const RunConfig& config, std::ostream& log);
// decomposition.csv and represent.json.
int cmd_represent(const RunConfig& config, std::ostream& log);
// reports.jsonl; exit 3 on any failed inequality.
int cmd_verify(const RunConfig& config, const std::vector<std::string>& suites, std::ostream& log);

// Full command line: gexp [--config PATH] [--seed U64] [--out DIR] [--quiet] {price|represent|verify [--suite ..]}
int run_cli(int argc, const char* const* argv);

} // namespace gexp

#endif // GEXP_CLI_HPP
