#include "cacq/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace cacq {

std::string ConfigValue::describe() const {
  switch (kind) {
    case Kind::number: {
      std::ostringstream s;
      s << number;
      return s.str();
    }
    case Kind::string: return '"' + text + '"';
    case Kind::boolean: return flag ? "true" : "false";
    case Kind::word: return text;
    case Kind::array: return "an array";
    case Kind::call: return text + "(...)";
  }
  return "?";
}

double ConfigValue::as_number(const std::string& what) const {
  if (kind != Kind::number) throw ConfigError(what + " must be a number, got " + describe(), line);
  return number;
}

int ConfigValue::as_int(const std::string& what) const {
  const double v = as_number(what);
  if (v != std::floor(v) || std::abs(v) > 2e9) throw ConfigError(what + " must be an integer", line);
  return static_cast<int>(v);
}

std::vector<double> ConfigValue::as_vector(const std::string& what) const {
  if (kind != Kind::array) throw ConfigError(what + " must be an array of numbers", line);
  std::vector<double> out;
  for (const auto& item : items) out.push_back(item.as_number(what));
  return out;
}

std::vector<std::vector<double>> ConfigValue::as_matrix(const std::string& what) const {
  if (kind != Kind::array) throw ConfigError(what + " must be a matrix literal [[...], ...]", line);
  std::vector<std::vector<double>> out;
  for (const auto& row : items) out.push_back(row.as_vector(what));
  return out;
}

const ConfigEntry* ConfigSection::find(const std::string& key) const {
  auto it = entries.find(key);
  if (it == entries.end()) return nullptr;
  used_[key] = true;
  return &it->second;
}

const ConfigEntry& ConfigSection::require(const std::string& key) const {
  const ConfigEntry* e = find(key);
  if (!e) throw ConfigError("missing key '" + key + "' in [" + name + "]", line);
  return *e;
}

double ConfigSection::number(const std::string& key, std::optional<double> fallback) const {
  if (const ConfigEntry* e = find(key)) return e->value.as_number(name + "." + key);
  if (!fallback) require(key);
  return *fallback;
}

int ConfigSection::integer(const std::string& key, std::optional<int> fallback) const {
  if (const ConfigEntry* e = find(key)) return e->value.as_int(name + "." + key);
  if (!fallback) require(key);
  return *fallback;
}

bool ConfigSection::boolean(const std::string& key, std::optional<bool> fallback) const {
  if (const ConfigEntry* e = find(key)) {
    if (e->value.kind != ConfigValue::Kind::boolean)
      throw ConfigError(name + "." + key + " must be true or false", e->line);
    return e->value.flag;
  }
  if (!fallback) require(key);
  return *fallback;
}

std::string ConfigSection::word(const std::string& key, std::optional<std::string> fallback) const {
  if (const ConfigEntry* e = find(key)) {
    if (e->value.kind != ConfigValue::Kind::word && e->value.kind != ConfigValue::Kind::string)
      throw ConfigError(name + "." + key + " must be a name, got " + e->value.describe(), e->line);
    return e->value.text;
  }
  if (!fallback) require(key);
  return *fallback;
}

void ConfigSection::reject_unused() const {
  for (const auto& key : order)
    if (!used_.count(key))
      throw ConfigError("unknown key '" + key + "' in [" + name + "]", entries.at(key).line);
}

const ConfigSection* ConfigDocument::section(const std::string& name) const {
  auto it = sections.find(name);
  return it == sections.end() ? nullptr : &it->second;
}

const ConfigSection& ConfigDocument::require_section(const std::string& name) const {
  if (const ConfigSection* s = section(name)) return *s;
  throw ConfigError("missing section [" + name + "]", 0);
}

void ConfigDocument::reject_unknown_sections(const std::vector<std::string>& known) const {
  for (const auto& [name, s] : sections) {
    bool ok = false;
    for (const auto& k : known) ok = ok || k == name;
    if (!ok) throw ConfigError("unknown section [" + name + "]", s.line);
  }
}

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  ConfigDocument run() {
    ConfigDocument doc;
    ConfigSection* current = nullptr;
    bool any = false;
    for (;;) {
      skip_blank_lines();
      if (eof()) break;
      any = true;
      if (peek() == '[') {
        const int line = line_;
        ++pos_;
        skip_spaces();
        const std::string name = identifier("section name");
        skip_spaces();
        expect(']');
        end_of_statement();
        if (doc.sections.count(name)) throw ConfigError("duplicate section [" + name + "]", line);
        current = &doc.sections[name];
        current->name = name;
        current->line = line;
        continue;
      }
      const int line = line_;
      const std::string key = identifier("key");
      if (!current) throw ConfigError("key '" + key + "' appears before any [section]", line);
      skip_spaces();
      expect('=');
      skip_spaces();
      ConfigEntry entry{value(0), line};
      end_of_statement();
      if (current->entries.count(key))
        throw ConfigError("duplicate key '" + key + "' in [" + current->name + "]", line);
      current->entries.emplace(key, std::move(entry));
      current->order.push_back(key);
    }
    if (!any) throw ConfigError("config is empty", 0);
    return doc;
  }

 private:
  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return eof() ? '\0' : text_[pos_]; }

  void skip_spaces() {
    while (!eof()) {
      const char c = peek();
      if (c == ' ' || c == '\t' || c == '\r') {
        ++pos_;
      } else if (c == '#') {
        while (!eof() && peek() != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  // Inside brackets a value may continue on the next line.
  void skip_space_and_newlines() {
    for (;;) {
      skip_spaces();
      if (peek() != '\n') return;
      ++pos_;
      ++line_;
    }
  }

  void skip_blank_lines() { skip_space_and_newlines(); }

  void end_of_statement() {
    skip_spaces();
    if (eof()) return;
    if (peek() != '\n') throw ConfigError(std::string("unexpected '") + peek() + "' after value", line_);
    ++pos_;
    ++line_;
  }

  void expect(char c) {
    if (peek() != c) {
      const std::string got = eof() ? "end of file" : std::string("'") + peek() + "'";
      throw ConfigError(std::string("expected '") + c + "', found " + got, line_);
    }
    ++pos_;
  }

  std::string identifier(const char* what) {
    const std::size_t start = pos_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '.'))
      ++pos_;
    if (start == pos_) {
      const std::string got = eof() ? "end of file" : std::string("'") + peek() + "'";
      throw ConfigError(std::string("expected ") + what + ", found " + got, line_);
    }
    return std::string(text_.substr(start, pos_ - start));
  }

  ConfigValue value(int depth) {
    if (depth > 16) throw ConfigError("values nested too deeply", line_);
    ConfigValue v;
    v.line = line_;
    const char c = peek();
    if (c == '[') {
      ++pos_;
      v.kind = ConfigValue::Kind::array;
      v.items = list(']', depth);
      return v;
    }
    if (c == '"') {
      ++pos_;
      v.kind = ConfigValue::Kind::string;
      while (!eof() && peek() != '"' && peek() != '\n') v.text += text_[pos_++];
      expect('"');
      return v;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
      const std::string token = number_token();
      char* end = nullptr;
      v.number = std::strtod(token.c_str(), &end);
      if (token.empty() || end != token.c_str() + token.size() || !std::isfinite(v.number))
        throw ConfigError("malformed number '" + token + "'", v.line);
      return v;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      v.text = identifier("value");
      if (peek() == '(') {
        ++pos_;
        v.kind = ConfigValue::Kind::call;
        v.items = list(')', depth);
      } else if (v.text == "true" || v.text == "false") {
        v.kind = ConfigValue::Kind::boolean;
        v.flag = v.text == "true";
      } else {
        v.kind = ConfigValue::Kind::word;
      }
      return v;
    }
    throw ConfigError(eof() || c == '\n' ? std::string("missing value")
                                         : std::string("unexpected '") + c + "' where a value was expected",
                      line_);
  }

  std::string number_token() {
    const std::size_t start = pos_;
    while (!eof()) {
      const char c = peek();
      const bool exp_sign = (c == '-' || c == '+') && pos_ > start &&
                            (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E');
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == 'e' || c == 'E' || exp_sign ||
          (pos_ == start && (c == '-' || c == '+')))
        ++pos_;
      else
        break;
    }
    return std::string(text_.substr(start, pos_ - start));
  }

  std::vector<ConfigValue> list(char close, int depth) {
    const int open_line = line_;
    std::vector<ConfigValue> items;
    skip_space_and_newlines();
    if (peek() == close) {
      ++pos_;
      return items;
    }
    for (;;) {
      if (eof()) throw ConfigError(std::string("unterminated list, missing '") + close + "'", open_line);
      items.push_back(value(depth + 1));
      skip_space_and_newlines();
      if (peek() == ',') {
        ++pos_;
        skip_space_and_newlines();
        if (peek() == close) {
          ++pos_;
          return items;
        }
        continue;
      }
      if (eof()) throw ConfigError(std::string("unterminated list, missing '") + close + "'", open_line);
      expect(close);
      return items;
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

}  // namespace

ConfigDocument parse_config(std::string_view text) { return Parser(text).run(); }

ConfigDocument load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'", 0);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace cacq
