/** @file cli.hpp
 *  @brief Command dispatch for the sapt executable.
 *
 *  Commands: simulate, estimate, weights, forecast. Settings resolve as
 *  flags > config file > defaults; every output file starts with a comment
 *  header holding the toolkit version and the resolved settings.
 */
#pragma once

#include "csv_io.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace sapt::cli {

enum ExitCode { kOk = 0, kConfigError = 2, kNumericError = 3, kIoError = 4 };

struct KeySpec {
    std::string key;
    std::string default_value;
    std::string help;
    bool is_flag = false;  // boolean switch without a value
};

/// Recognized settings for a command, in echo order.
const std::vector<KeySpec>& command_keys(const std::string& command);
const std::vector<std::string>& command_names();

struct RunConfig {
    std::string command;
    std::vector<std::pair<std::string, std::string>> values;  // echo order

    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;
    bool provided(const std::string& key) const { return !get(key).empty(); }
    int get_int(const std::string& key, int min_value) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<double> get_list(const std::string& key) const;

    /// "sapt <version>", "command=<c>", then "key=value" per setting. The
    /// output location is left out so that file contents do not depend on it.
    std::vector<std::string> header() const;
};

/// key=value lines; '#' starts a comment; blank lines ignored.
std::map<std::string, std::string> parse_config_file(const std::string& path);

/// Layers defaults, file and flag values; unknown keys raise ValidationError.
RunConfig resolve_config(const std::string& command, const std::map<std::string, std::string>& file,
                         const std::map<std::string, std::string>& flags);

/// Each returns the list of files written.
std::vector<std::string> cmd_simulate(const RunConfig& config, int threads);
std::vector<std::string> cmd_estimate(const RunConfig& config);
std::vector<std::string> cmd_weights(const RunConfig& config);
std::vector<std::string> cmd_forecast(const RunConfig& config);

/// Parses argv-style arguments (without the program name), runs the command
/// and maps failures to exit codes with a one-line diagnostic on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sapt::cli
