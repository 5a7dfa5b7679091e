#include "support/schema_check.hpp"

#include <stdexcept>

namespace ser_audit::testing {

namespace {

using nlohmann::json;

bool HasType(const json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  if (type == "integer") {
    return v.is_number_integer() || (v.is_number_float() && v.get<double>() == static_cast<double>(static_cast<long long>(v.get<double>())));
  }
  if (type == "number") return v.is_number();
  throw std::invalid_argument("unknown schema type " + type);
}

class Validator {
 public:
  explicit Validator(const json& root) : root_(root) {}

  void Check(const json& schema, const json& v, const std::string& at) {
    if (schema.is_boolean()) {
      if (!schema.get<bool>()) Fail(at, "not allowed");
      return;
    }
    if (schema.contains("$ref")) {
      Check(Resolve(schema["$ref"].get<std::string>()), v, at);
      return;
    }
    if (schema.contains("type")) {
      const json& t = schema["type"];
      bool ok = false;
      if (t.is_string()) {
        ok = HasType(v, t.get<std::string>());
      } else {
        for (const auto& alt : t) ok = ok || HasType(v, alt.get<std::string>());
      }
      if (!ok) {
        Fail(at, "expected type " + t.dump() + ", got " + v.dump().substr(0, 60));
        return;
      }
    }
    if (schema.contains("const") && v != schema["const"]) Fail(at, "const mismatch");
    if (schema.contains("enum")) {
      bool found = false;
      for (const auto& e : schema["enum"]) found = found || e == v;
      if (!found) Fail(at, "value not in enum: " + v.dump());
    }
    if (v.is_number()) {
      const double x = v.get<double>();
      if (schema.contains("minimum") && x < schema["minimum"].get<double>()) Fail(at, "below minimum");
      if (schema.contains("maximum") && x > schema["maximum"].get<double>()) Fail(at, "above maximum");
    }
    if (schema.contains("anyOf")) {
      bool any = false;
      for (const auto& alt : schema["anyOf"]) {
        Validator sub(root_);
        sub.Check(alt, v, at);
        if (sub.errors_.empty()) {
          any = true;
          break;
        }
      }
      if (!any) Fail(at, "no anyOf branch matches");
    }
    if (v.is_object()) CheckObject(schema, v, at);
    if (v.is_array()) {
      if (schema.contains("minItems") && v.size() < schema["minItems"].get<std::size_t>()) {
        Fail(at, "too few items");
      }
      if (schema.contains("items")) {
        for (std::size_t i = 0; i < v.size(); ++i) {
          Check(schema["items"], v[i], at + "/" + std::to_string(i));
        }
      }
    }
  }

  std::vector<std::string> errors_;

 private:
  void CheckObject(const json& schema, const json& v, const std::string& at) {
    if (schema.contains("required")) {
      for (const auto& key : schema["required"]) {
        if (!v.contains(key.get<std::string>())) Fail(at, "missing " + key.get<std::string>());
      }
    }
    const json empty = json::object();
    const json& props = schema.contains("properties") ? schema["properties"] : empty;
    for (auto it = v.begin(); it != v.end(); ++it) {
      const std::string child = at + "/" + it.key();
      if (props.contains(it.key())) {
        Check(props[it.key()], it.value(), child);
      } else if (schema.contains("additionalProperties")) {
        Check(schema["additionalProperties"], it.value(), child);
      }
    }
  }

  const json& Resolve(const std::string& ref) {
    if (ref.rfind("#/", 0) != 0) throw std::invalid_argument("only local refs: " + ref);
    return root_.at(json::json_pointer(ref.substr(1)));
  }

  void Fail(const std::string& at, const std::string& what) {
    errors_.push_back((at.empty() ? "/" : at) + ": " + what);
  }

  const json& root_;
};

}  // namespace

std::vector<std::string> ValidateSchema(const nlohmann::json& schema,
                                        const nlohmann::json& instance) {
  Validator v(schema);
  v.Check(schema, instance, "");
  return v.errors_;
}

}  // namespace ser_audit::testing
