#include "goxn/environment.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "goxn/csv.hpp"
#include "goxn/error.hpp"

namespace goxn {

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

struct CommandRun {
    int exit_code = -1;
    std::string out;
    std::string err;
};

CommandRun run_command(const std::string& command, const std::string& input) {
    static std::atomic<unsigned> counter{0};
    const auto base = fs::temp_directory_path() /
                      ("goxn-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    const auto in_path = base.string() + ".in";
    const auto out_path = base.string() + ".out";
    const auto err_path = base.string() + ".err";
    {
        std::ofstream in(in_path, std::ios::binary);
        in << input << '\n';
        if (!in) throw IoError("cannot write " + in_path);
    }
    const std::string full = "( " + command + " ) < '" + in_path + "' > '" + out_path + "' 2> '" +
                             err_path + "'";
    const int status = std::system(full.c_str());
    CommandRun run;
    if (status != -1 && WIFEXITED(status)) run.exit_code = WEXITSTATUS(status);
    run.out = slurp(out_path);
    run.err = slurp(err_path);
    std::error_code ec;
    fs::remove(in_path, ec);
    fs::remove(out_path, ec);
    fs::remove(err_path, ec);
    return run;
}

std::string substitute(std::string command, const std::string& name) {
    for (auto pos = command.find("{action}"); pos != std::string::npos;
         pos = command.find("{action}", pos + name.size())) {
        command.replace(pos, 8, name);
    }
    return command;
}

}  // namespace

ExternalCommandEnvironment::ExternalCommandEnvironment(std::string command_template,
                                                       std::string prometheus_endpoint,
                                                       RetryPolicy retry)
    : command_template_(std::move(command_template)), client_(std::move(prometheus_endpoint), retry) {
    if (command_template_.empty()) throw ValidationError("environment command must not be empty");
}

ActionResult ExternalCommandEnvironment::execute(const ActionDescriptor& action) {
    const auto run = run_command(substitute(command_template_, action.name), action.render());
    ActionResult result;
    result.ok = run.exit_code == 0;
    std::istringstream lines(run.out);
    for (std::string line; std::getline(lines, line);) {
        line = trim(line);
        const auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0) continue;
        result.values[line.substr(0, eq)] = line.substr(eq + 1);
    }
    result.message = trim(run.err.empty() ? run.out : run.err);
    if (!result.ok && result.message.empty()) {
        result.message = "command exited with status " + std::to_string(run.exit_code);
    }
    return result;
}

LoadTarget& ExternalCommandEnvironment::load_target(const LoadProfile& profile) {
    target_ = std::make_unique<HttpLoadTarget>(profile.target);
    return *target_;
}

StorageSnapshot ExternalCommandEnvironment::storage_snapshot() {
    ActionDescriptor action{"storage_snapshot", {}};
    const auto run = run_command(substitute(command_template_, action.name), action.render());
    if (run.exit_code != 0) {
        throw EnvironmentError("storage snapshot command failed: " + trim(run.err));
    }
    StorageSnapshot snap;
    snap.taken_at = clock_.now();
    std::istringstream lines(run.out);
    int n = 0;
    for (std::string line; std::getline(lines, line);) {
        ++n;
        line = trim(line);
        if (line.empty()) continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) {
            throw ParseError("storage snapshot line " + std::to_string(n) + ": expected container_id,bytes");
        }
        const auto value = line.substr(comma + 1);
        if (line.substr(0, comma) == "container_id") continue;
        try {
            snap.rows.emplace_back(line.substr(0, comma), parse_unsigned(value));
        } catch (const ParseError&) {
            throw ParseError("storage snapshot line " + std::to_string(n) + ": bad byte count '" + value + "'");
        }
    }
    return snap;
}

}  // namespace goxn
