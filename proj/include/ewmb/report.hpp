#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ewmb {

// Minimal JSON emitter producing byte-deterministic reports: keys appear in
// insertion order, doubles carry 17 significant digits, newline-terminated
// two-space indentation. Values must be finite.
class JsonWriter {
 public:
  JsonWriter& begin_object();
  JsonWriter& end_object();
  JsonWriter& begin_array();
  JsonWriter& end_array();
  JsonWriter& key(const std::string& name);
  JsonWriter& value(double v);
  JsonWriter& value(const std::string& v);
  JsonWriter& value(const char* v);
  JsonWriter& value(bool v);
  JsonWriter& value(std::uint64_t v);
  JsonWriter& value(std::int64_t v);
  JsonWriter& null_value();

  // convenience: key + scalar
  template <typename T>
  JsonWriter& kv(const std::string& name, const T& v) {
    key(name);
    return value(v);
  }

  std::string str() const;

 private:
  void before_value();
  void newline_indent();

  std::string out_;
  std::vector<bool> first_in_scope_;
  std::vector<bool> is_object_;
  bool pending_key_ = false;
};

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace ewmb
