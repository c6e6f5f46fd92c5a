#include "laughsynth/mos/store.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <unistd.h>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace laughsynth::mos {

namespace {

std::string errno_text() { return std::strerror(errno); }

}  // namespace

LineLog::LineLog(std::filesystem::path path, bool fsync) : path_(std::move(path)), fsync_(fsync) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::string content;
  if (std::filesystem::exists(path_)) {
    std::ifstream in(path_, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    content = ss.str();
  }
  std::size_t keep = content.size();
  if (!content.empty() && content.back() != '\n') {
    keep = content.rfind('\n');
    keep = keep == std::string::npos ? 0 : keep + 1;
    spdlog::warn("{}: dropping unterminated last line ({} bytes)", path_.string(), content.size() - keep);
  }
  std::istringstream lines(content.substr(0, keep));
  for (std::string line; std::getline(lines, line);)
    if (!line.empty()) replayed_.push_back(line);

  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw StoreError(fmt::format("cannot open {}: {}", path_.string(), errno_text()));
  if (keep != content.size() && ::ftruncate(fd_, static_cast<off_t>(keep)) != 0)
    throw StoreError(fmt::format("cannot truncate {}: {}", path_.string(), errno_text()));
}

LineLog::~LineLog() {
  if (fd_ >= 0) ::close(fd_);
}

void LineLog::append(const std::string& line) {
  if (line.find('\n') != std::string::npos) throw StoreError("log lines cannot contain newlines");
  const std::string data = line + "\n";
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(fd_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw StoreError(fmt::format("write to {} failed: {}", path_.string(), errno_text()));
    }
    off += static_cast<std::size_t>(n);
  }
  if (fsync_ && ::fsync(fd_) != 0) throw StoreError(fmt::format("fsync {} failed: {}", path_.string(), errno_text()));
}

RatingStore::RatingStore(const std::filesystem::path& path, bool fsync) : log_(path, fsync) {
  for (std::size_t i = 0; i < log_.replayed().size(); ++i) {
    eval::RatingRecord r;
    try {
      r = eval::from_json_line(log_.replayed()[i]);
    } catch (const eval::EvalError& e) {
      throw StoreError(fmt::format("{}:{}: {}", path.string(), i + 1, e.what()));
    }
    if (!keys_.emplace(r.participant, r.sample).second)
      throw StoreError(fmt::format("{}:{}: duplicate rating by {} for {}", path.string(), i + 1, r.participant, r.sample));
    records_.push_back(std::move(r));
  }
}

bool RatingStore::append(const eval::RatingRecord& r) {
  if (r.score < 1 || r.score > 5) throw StoreError(fmt::format("score {} is outside 1..5", r.score));
  std::lock_guard lock(mu_);
  if (keys_.count({r.participant, r.sample})) return false;
  log_.append(eval::to_json_line(r));
  keys_.emplace(r.participant, r.sample);
  records_.push_back(r);
  return true;
}

bool RatingStore::contains(const std::string& participant, const std::string& sample) const {
  std::lock_guard lock(mu_);
  return keys_.count({participant, sample}) > 0;
}

std::vector<eval::RatingRecord> RatingStore::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::size_t RatingStore::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

}  // namespace laughsynth::mos
