#pragma once

#include <map>
#include <string>
#include <vector>

#include "protoed/distance.hpp"
#include "protoed/proto.hpp"

namespace protoed {

enum class CrfKind { None, Vanilla, Cdt, Pa };
enum class ClMode { None, InBatch, Moco, Auto };
// Linear is the supervised fine-tuning baseline (a classifier over h).
enum class HeadKind { Prototype, Linear };

// One point in the design-element space. With loss aggregation the label and
// mention sources get separate branches whose losses are summed; the mention
// branch then scores with mean distances (score level).
struct MethodConfig {
  std::string name = "custom";
  HeadKind head = HeadKind::Prototype;
  ProtoSource source = ProtoSource::Mentions;
  Aggregation aggregation = Aggregation::Feature;
  DistanceSpec distance;
  TransferSpec transfer;
  CrfKind crf = CrfKind::None;
  ClMode cl = ClMode::None;

  bool operator==(const MethodConfig&) const = default;

  bool uses_label() const { return head == HeadKind::Prototype && source != ProtoSource::Mentions; }
  bool uses_mentions() const { return head == HeadKind::Prototype && source != ProtoSource::Label; }
  // Separate label and mention branches.
  bool split_branches() const {
    return head == HeadKind::Prototype && source == ProtoSource::Both && aggregation == Aggregation::Loss;
  }
};

std::vector<std::string> preset_names();
// Throws ConfigError listing the known presets for an unknown name.
MethodConfig method_preset(const std::string& name);
void validate(const MethodConfig& method);

std::string to_string(ProtoSource s);
std::string to_string(Aggregation a);
std::string to_string(CrfKind c);
std::string to_string(ClMode c);
std::string to_string(HeadKind h);
ProtoSource source_from_string(const std::string& s);
Aggregation aggregation_from_string(const std::string& s);
CrfKind crf_from_string(const std::string& s);
ClMode cl_from_string(const std::string& s);
HeadKind head_from_string(const std::string& s);

// Key-value form (name, head, source, aggregation, distance, tau, transfer,
// transfer_dim, crf, cl). Parsing starts from a preset when `method` is
// present, then applies the remaining keys; unknown keys are left alone.
std::map<std::string, std::string> to_kv(const MethodConfig& method);
MethodConfig method_from_kv(const std::map<std::string, std::string>& kv);
std::string to_text(const MethodConfig& method);

}  // namespace protoed
