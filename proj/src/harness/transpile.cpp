#include <fmt/format.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <set>

#include "poly/core/codec.hpp"
#include "poly/core/errors.hpp"
#include "poly/harness/pipeline.hpp"

extern char** environ;

namespace poly::harness {

namespace {

// Shell-style word splitting: whitespace separates, quotes group, backslash
// escapes outside single quotes.
std::vector<std::string> split_command(const std::string& cmd) {
  std::vector<std::string> words;
  std::string cur;
  bool in_word = false;
  char quote = 0;
  for (std::size_t i = 0; i < cmd.size(); ++i) {
    char c = cmd[i];
    if (quote) {
      if (c == quote)
        quote = 0;
      else if (c == '\\' && quote == '"' && i + 1 < cmd.size())
        cur += cmd[++i];
      else
        cur += c;
    } else if (c == '\'' || c == '"') {
      quote = c;
      in_word = true;
    } else if (c == '\\' && i + 1 < cmd.size()) {
      cur += cmd[++i];
      in_word = true;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      if (in_word) words.push_back(std::move(cur));
      cur.clear();
      in_word = false;
    } else {
      cur += c;
      in_word = true;
    }
  }
  if (quote) throw ConfigError(fmt::format("unterminated quote in plugin command '{}'", cmd));
  if (in_word) words.push_back(std::move(cur));
  return words;
}

std::string resolve_executable(const std::string& name) {
  auto runnable = [](const std::string& p) { return access(p.c_str(), X_OK) == 0; };
  if (name.find('/') != std::string::npos) {
    if (runnable(name)) return name;
  } else if (const char* path = std::getenv("PATH")) {
    std::string_view rest(path);
    while (true) {
      auto colon = rest.find(':');
      std::string dir(rest.substr(0, colon));
      auto candidate = (dir.empty() ? std::string(".") : dir) + "/" + name;
      if (runnable(candidate)) return candidate;
      if (colon == std::string_view::npos) break;
      rest.remove_prefix(colon + 1);
    }
  }
  throw ConfigError(fmt::format("transpiler plugin '{}' is not an executable file", name));
}

struct ChildOutput {
  int status = 0;
  std::string out, err;
};

ChildOutput run_child(const std::string& exe, const std::vector<std::string>& args, const std::string& input) {
  int in[2], out[2], err[2];
  if (pipe(in) || pipe(out) || pipe(err)) throw RunError(fmt::format("pipe failed: {}", std::strerror(errno)));

  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_adddup2(&fa, in[0], 0);
  posix_spawn_file_actions_adddup2(&fa, out[1], 1);
  posix_spawn_file_actions_adddup2(&fa, err[1], 2);
  for (int fd : {in[0], in[1], out[0], out[1], err[0], err[1]}) posix_spawn_file_actions_addclose(&fa, fd);

  std::vector<char*> argv;
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);

  pid_t pid = 0;
  int rc = posix_spawn(&pid, exe.c_str(), &fa, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&fa);
  close(in[0]);
  close(out[1]);
  close(err[1]);
  if (rc != 0) {
    close(in[1]);
    close(out[0]);
    close(err[0]);
    throw ConfigError(fmt::format("cannot start transpiler plugin {}: {}", exe, std::strerror(rc)));
  }

  // A plugin that exits without reading stdin must not kill us with SIGPIPE.
  sigset_t pipe_set, old_set;
  sigemptyset(&pipe_set);
  sigaddset(&pipe_set, SIGPIPE);
  pthread_sigmask(SIG_BLOCK, &pipe_set, &old_set);

  ChildOutput res;
  std::size_t written = 0;
  int fds[3] = {in[1], out[0], err[0]};
  if (input.empty()) {
    close(fds[0]);
    fds[0] = -1;
  }
  while (fds[0] >= 0 || fds[1] >= 0 || fds[2] >= 0) {
    pollfd p[3];
    for (int i = 0; i < 3; ++i) p[i] = {fds[i], static_cast<short>(i == 0 ? POLLOUT : POLLIN), 0};
    if (poll(p, 3, -1) < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (fds[0] >= 0 && p[0].revents) {
      auto n = write(fds[0], input.data() + written, input.size() - written);
      if (n > 0) written += static_cast<std::size_t>(n);
      if (n < 0 && errno != EAGAIN && errno != EINTR) written = input.size();
      if (written == input.size()) {
        close(fds[0]);
        fds[0] = -1;
      }
    }
    for (int i = 1; i < 3; ++i) {
      if (fds[i] < 0 || !p[i].revents) continue;
      char buf[4096];
      auto n = read(fds[i], buf, sizeof buf);
      if (n > 0)
        (i == 1 ? res.out : res.err).append(buf, static_cast<std::size_t>(n));
      else if (n == 0 || (errno != EAGAIN && errno != EINTR)) {
        close(fds[i]);
        fds[i] = -1;
      }
    }
  }
  waitpid(pid, &res.status, 0);

  timespec zero{0, 0};
  while (sigtimedwait(&pipe_set, nullptr, &zero) > 0) {
  }
  pthread_sigmask(SIG_SETMASK, &old_set, nullptr);
  return res;
}

std::string trimmed(std::string s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

TranspileResult transpile_external(const std::string& sql, const Dialect& from, const Dialect& to,
                                   const std::string& plugin) {
  auto words = split_command(plugin);
  if (words.empty()) throw ConfigError("empty transpiler plugin command");
  auto exe = resolve_executable(words[0]);
  words.insert(words.end(), {"--from", from.id(), "--to", to.id()});
  auto child = run_child(exe, words, sql);

  TranspileResult r;
  auto err = trimmed(child.err);
  if (WIFSIGNALED(child.status)) {
    r.error = fmt::format("plugin killed by signal {}", WTERMSIG(child.status));
  } else if (WEXITSTATUS(child.status) != 0) {
    r.error = fmt::format("plugin exited with status {}", WEXITSTATUS(child.status));
  } else if (auto out = trimmed(child.out); out.empty()) {
    r.error = "plugin produced no output";
  } else {
    r.ok = true;
    r.sql = std::move(out);
    return r;
  }
  if (!err.empty()) r.error += ": " + err;
  return r;
}

TranspileSummary transpile_predictions(RunDirectory& run, const Dialect& from, const Dialect& to,
                                       const std::string& plugin) {
  auto preds = run.predictions();
  std::set<std::pair<std::string, std::int64_t>> have;
  for (const auto& p : preds)
    if (p.dialect == to) have.emplace(p.model_id, p.example_id);

  TranspileSummary s;
  run.add_dialect(to);
  JsonlWriter writer(run.predictions_file());
  std::vector<std::string> failures;
  for (const auto& p : preds) {
    if (p.dialect != from) continue;
    ++s.total;
    auto model = p.model_id + "@" + from.id();
    if (have.count({model, p.example_id})) {
      ++s.existing;
      ++s.transpiled;
      continue;
    }
    if (p.extraction_error) continue;
    auto r = transpile_external(p.sql, from, to, plugin);
    if (!r.ok) {
      failures.push_back(fmt::format("{}:{}: {}", p.model_id, p.example_id, r.error));
      continue;
    }
    Prediction out;
    out.example_id = p.example_id;
    out.model_id = model;
    out.dialect = to;
    out.sql = r.sql;
    out.raw_completion = p.sql;
    writer.append(nlohmann::json(out));
    ++s.transpiled;
  }
  run.set_status("transpile", from.id() + "->" + to.id(),
                 {{"total", s.total}, {"transpiled", s.transpiled}, {"coverage", s.coverage()},
                  {"failures", failures}});
  return s;
}

}  // namespace poly::harness
