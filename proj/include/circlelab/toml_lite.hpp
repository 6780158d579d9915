#pragma once

// Minimal TOML reader covering the subset this project's file formats
// use: top-level and [section] tables, [[array-of-tables]], bare keys,
// strings, integers, floats, booleans, arrays, and inline tables.
// Comments start with '#'.  Arrays may span lines.

#include <cctype>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace circlelab::toml {

struct Value;
using Array = std::vector<Value>;
using Table = std::vector<std::pair<std::string, Value>>;  // insertion-ordered

struct Value {
  enum class Kind { String, Integer, Float, Boolean, Array, Table } kind = Kind::Table;
  std::string str;
  long long integer = 0;
  double number = 0;
  bool boolean = false;
  std::shared_ptr<Array> arr;
  std::shared_ptr<Table> tab;

  bool has(const std::string& key) const {
    if (kind != Kind::Table) return false;
    for (const auto& [k, v] : *tab)
      if (k == key) return true;
    return false;
  }
  const Value& at(const std::string& key) const {
    if (kind != Kind::Table) throw std::runtime_error("toml: not a table");
    for (const auto& [k, v] : *tab)
      if (k == key) return v;
    throw std::runtime_error("toml: missing key '" + key + "'");
  }
  const std::string& as_string() const {
    if (kind != Kind::String) throw std::runtime_error("toml: expected string");
    return str;
  }
  long long as_int() const {
    if (kind != Kind::Integer) throw std::runtime_error("toml: expected integer");
    return integer;
  }
  double as_float() const {
    if (kind == Kind::Integer) return static_cast<double>(integer);
    if (kind != Kind::Float) throw std::runtime_error("toml: expected float");
    return number;
  }
  const Array& as_array() const {
    if (kind != Kind::Array) throw std::runtime_error("toml: expected array");
    return *arr;
  }
};

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  Value parse_document() {
    Value root = make_table();
    Value* current = &root;
    skip_ws_comments();
    while (!eof()) {
      if (peek() == '[') {
        ++pos_;
        bool array_of_tables = !eof() && peek() == '[';
        if (array_of_tables) ++pos_;
        std::string name = parse_bare_key();
        expect(']');
        if (array_of_tables) expect(']');
        if (array_of_tables) {
          Value* arr_holder = find_or_insert(root, name);
          if (arr_holder->kind != Value::Kind::Array) {
            *arr_holder = Value{};
            arr_holder->kind = Value::Kind::Array;
            arr_holder->arr = std::make_shared<Array>();
          }
          arr_holder->arr->push_back(make_table());
          current = &arr_holder->arr->back();
        } else {
          Value* t = find_or_insert(root, name);
          *t = make_table();
          current = t;
        }
      } else {
        std::string key = parse_bare_key();
        expect('=');
        Value v = parse_value();
        current->tab->emplace_back(std::move(key), std::move(v));
      }
      skip_ws_comments();
    }
    return root;
  }

 private:
  static Value make_table() {
    Value v;
    v.kind = Value::Kind::Table;
    v.tab = std::make_shared<Table>();
    return v;
  }

  Value* find_or_insert(Value& t, const std::string& key) {
    for (auto& [k, v] : *t.tab)
      if (k == key) return &v;
    t.tab->emplace_back(key, Value{});
    return &t.tab->back().second;
  }

  bool eof() const { return pos_ >= s_.size(); }
  char peek() const { return s_[pos_]; }

  void skip_ws_comments() {
    while (!eof()) {
      char c = peek();
      if (c == '#') {
        while (!eof() && peek() != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  void expect(char c) {
    skip_ws_comments();
    if (eof() || peek() != c)
      throw std::runtime_error(std::string("toml: expected '") + c + "'");
    ++pos_;
  }

  std::string parse_bare_key() {
    skip_ws_comments();
    std::string k;
    while (!eof()) {
      char c = peek();
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') {
        k += c;
        ++pos_;
      } else {
        break;
      }
    }
    if (k.empty()) throw std::runtime_error("toml: expected key");
    return k;
  }

  Value parse_value() {
    skip_ws_comments();
    if (eof()) throw std::runtime_error("toml: expected value");
    char c = peek();
    Value v;
    if (c == '"') {
      ++pos_;
      v.kind = Value::Kind::String;
      while (!eof() && peek() != '"') {
        char ch = peek();
        if (ch == '\\') {
          ++pos_;
          if (eof()) break;
          char esc = peek();
          v.str += esc == 'n' ? '\n' : esc == 't' ? '\t' : esc;
        } else {
          v.str += ch;
        }
        ++pos_;
      }
      expect('"');
      return v;
    }
    if (c == '[') {
      ++pos_;
      v.kind = Value::Kind::Array;
      v.arr = std::make_shared<Array>();
      skip_ws_comments();
      while (!eof() && peek() != ']') {
        v.arr->push_back(parse_value());
        skip_ws_comments();
        if (!eof() && peek() == ',') {
          ++pos_;
          skip_ws_comments();
        }
      }
      expect(']');
      return v;
    }
    if (c == '{') {
      ++pos_;
      v = make_table();
      skip_ws_comments();
      while (!eof() && peek() != '}') {
        std::string key = parse_bare_key();
        expect('=');
        v.tab->emplace_back(std::move(key), parse_value());
        skip_ws_comments();
        if (!eof() && peek() == ',') {
          ++pos_;
          skip_ws_comments();
        }
      }
      expect('}');
      return v;
    }
    // bare scalar: bool, integer, or float
    std::string tok;
    while (!eof()) {
      char ch = peek();
      if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '+' || ch == '-' || ch == '.' ||
          ch == '_') {
        tok += ch;
        ++pos_;
      } else {
        break;
      }
    }
    if (tok == "true" || tok == "false") {
      v.kind = Value::Kind::Boolean;
      v.boolean = tok == "true";
      return v;
    }
    if (tok.find('.') == std::string::npos && tok.find('e') == std::string::npos &&
        tok.find('E') == std::string::npos) {
      v.kind = Value::Kind::Integer;
      v.integer = std::stoll(tok);
      return v;
    }
    v.kind = Value::Kind::Float;
    v.number = std::stod(tok);
    return v;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

inline Value parse(std::string_view text) { return Parser(text).parse_document(); }

}  // namespace circlelab::toml
