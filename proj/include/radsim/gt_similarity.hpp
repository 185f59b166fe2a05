#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "radsim/corpus.hpp"

namespace radsim {

struct EncodedFindingVector {
  std::string report_id;
  LabelSource source = LabelSource::CheXpert;
  std::vector<double> values;
};

// Positive 1.0, Negative 0.0, Uncertain -1.0, Missing -2.0.
double encode_mention(Mention mention);

EncodedFindingVector encode_vector(const FindingVector& vector, const FindingSchema& schema);

// dot(u, v) / (|u| |v|) clamped to [-1, 1]. Throws ZeroVector when either
// norm is zero; an all-Negative report encodes to the zero vector.
double cosine(std::span<const double> u, std::span<const double> v);

class EncodedStore {
 public:
  void add(EncodedFindingVector vector);
  const EncodedFindingVector* find(const std::string& report_id, LabelSource source) const;
  std::size_t size() const { return vectors_.size(); }

 private:
  std::map<std::pair<std::string, LabelSource>, EncodedFindingVector> vectors_;
};

double gt_similarity(const std::string& a_id, const std::string& b_id, LabelSource source,
                     const EncodedStore& store);

// Debug export: report_id,source,<schema names...>.
void write_encoded_csv(std::ostream& out, const FindingSchema& schema,
                       std::span<const EncodedFindingVector> vectors);

}  // namespace radsim
