#pragma once

#include <set>
#include <string>

#include "fhmc/error.hpp"
#include "fhmc/serialization.hpp"

namespace fhmc::detail {

// Reads known keys out of a JSON object and rejects the rest.
class ObjectReader {
public:
  ObjectReader(const Json &j, std::string context)
      : j_(j), context_(std::move(context)) {
    if (!j_.is_object()) {
      throw ValidationError(context_ + ": expected a JSON object");
    }
  }

  void read(const char *key, std::size_t &out) {
    if (const Json *v = take(key)) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && *v >= 0)) {
        fail(key, "a non-negative integer");
      }
      out = v->get<std::size_t>();
    }
  }
  void read(const char *key, std::uint64_t &out, int) {
    if (const Json *v = take(key)) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && *v >= 0)) {
        fail(key, "a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }
  void read(const char *key, double &out) {
    if (const Json *v = take(key)) {
      if (!v->is_number()) {
        fail(key, "a number");
      }
      out = v->get<double>();
    }
  }
  void read(const char *key, bool &out) {
    if (const Json *v = take(key)) {
      if (!v->is_boolean()) {
        fail(key, "a boolean");
      }
      out = v->get<bool>();
    }
  }
  void read(const char *key, std::string &out) {
    if (const Json *v = take(key)) {
      if (!v->is_string()) {
        fail(key, "a string");
      }
      out = v->get<std::string>();
    }
  }
  template <typename Fn> void read_with(const char *key, Fn &&fn) {
    if (const Json *v = take(key)) {
      fn(*v);
    }
  }

  void finish() const {
    for (const auto &item : j_.items()) {
      if (!seen_.contains(item.key())) {
        throw ValidationError(context_ + ": unknown key \"" + item.key() +
                              "\"");
      }
    }
  }

private:
  const Json *take(const char *key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  [[noreturn]] void fail(const char *key, const char *what) const {
    throw ValidationError(context_ + "." + key + " must be " + what);
  }

  const Json &j_;
  std::string context_;
  std::set<std::string> seen_;
};

} // namespace fhmc::detail
