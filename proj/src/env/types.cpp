#include "eef/env/types.hpp"

#include "eef/common/codec.hpp"
#include "eef/common/random.hpp"

namespace eef::env {

std::string_view to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::minishop: return "minishop";
    case EnvKind::chainworld: return "chainworld";
  }
  return "unknown";
}

EnvKind env_kind_from_string(std::string_view name) {
  if (name == "minishop") return EnvKind::minishop;
  if (name == "chainworld") return EnvKind::chainworld;
  throw EnvError("unknown environment kind '" + std::string(name) + "'");
}

std::string_view to_string(Split split) { return split == Split::train ? "train" : "test"; }

Split split_from_string(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "test") return Split::test;
  throw EnvError("unknown split '" + std::string(name) + "'");
}

std::string serialize(const StateSnapshot& snapshot) {
  FieldWriter w;
  w.put(kSnapshotSchema)
      .put(to_string(snapshot.env_kind))
      .put_uint(snapshot.step_index)
      .put(snapshot.internal_state)
      .put_uint(snapshot.history.size());
  for (const auto& h : snapshot.history) w.put(h.observation).put(h.action);
  return std::move(w).str();
}

StateSnapshot deserialize_snapshot(std::string_view bytes) {
  try {
    FieldReader r(bytes);
    if (r.next() != kSnapshotSchema) throw EnvError("snapshot schema mismatch");
    StateSnapshot s;
    s.env_kind = env_kind_from_string(r.next());
    s.step_index = static_cast<std::uint32_t>(r.next_uint());
    s.internal_state = std::string(r.next());
    auto n = r.next_uint();
    if (n != s.step_index) throw EnvError("snapshot history length does not match step index");
    s.history.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      HistoryEntry h;
      h.observation = std::string(r.next());
      h.action = std::string(r.next());
      s.history.push_back(std::move(h));
    }
    r.expect_done();
    return s;
  } catch (const CodecError& e) {
    throw EnvError(std::string("malformed snapshot: ") + e.what());
  }
}

FingerprintId state_fingerprint(const StateSnapshot& snapshot) {
  // env_kind and step_index are implied by the blob and history length.
  FieldWriter w;
  w.put(snapshot.internal_state).put_uint(snapshot.history.size());
  for (const auto& h : snapshot.history) w.put(h.observation).put(h.action);
  return fnv1a64(w.str());
}

}  // namespace eef::env
