#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace eef {

class CodecError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Length-prefixed text fields: "<decimal length>:<bytes>" concatenated.
// Canonical by construction, so equal values always encode to equal bytes.
class FieldWriter {
public:
  FieldWriter& put(std::string_view field);
  FieldWriter& put_int(std::int64_t v);
  FieldWriter& put_uint(std::uint64_t v);

  const std::string& str() const& { return out_; }
  std::string str() && { return std::move(out_); }

private:
  std::string out_;
};

class FieldReader {
public:
  explicit FieldReader(std::string_view in) : in_(in) {}

  std::string_view next();
  std::int64_t next_int();
  std::uint64_t next_uint();
  bool done() const { return pos_ == in_.size(); }
  void expect_done() const;

private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace eef
