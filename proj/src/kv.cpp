#include "radfuse/kv.hpp"

#include <fstream>
#include <sstream>

namespace radfuse {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
    case ErrorKind::Data: return "data";
    case ErrorKind::Numeric: return "numeric";
  }
  return "unknown";
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (c == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

}  // namespace

KeyValues KeyValues::parse(std::string_view text, const std::string& source) {
  KeyValues kv;
  kv.source_ = source;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const auto line = trim(strip_comment(text.substr(pos, end - pos)));
    pos = end + 1;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      fail(ErrorKind::Format, source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string raw(trim(line.substr(eq + 1)));
    if (key.empty() || raw.empty())
      fail(ErrorKind::Format, source + ":" + std::to_string(line_no) + ": empty key or value");
    if (kv.values_.contains(key))
      fail(ErrorKind::Format, source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    auto parsed = nlohmann::ordered_json::parse(raw, nullptr, false);
    if (parsed.is_discarded()) {
      if (raw.front() == '"' || raw.front() == '[' || raw.front() == '{')
        fail(ErrorKind::Format, source + ":" + std::to_string(line_no) + ": malformed value for '" + key + "'");
      parsed = raw;
    }
    kv.values_[key] = std::move(parsed);
  }
  return kv;
}

KeyValues KeyValues::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

std::string KeyValues::dump() const {
  std::string out;
  for (const auto& [key, value] : values_.items()) {
    out += key;
    out += " = ";
    out += value.dump();
    out += '\n';
  }
  return out;
}

void KeyValues::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << dump();
  if (!out) fail(ErrorKind::Io, "write failed: " + path.string());
}

}  // namespace radfuse
