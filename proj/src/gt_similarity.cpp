#include "radsim/gt_similarity.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <ostream>

#include "radsim/csv.hpp"
#include "radsim/error.hpp"

namespace radsim {

double encode_mention(Mention mention) {
  switch (mention) {
    case Mention::Positive: return 1.0;
    case Mention::Negative: return 0.0;
    case Mention::Uncertain: return -1.0;
    case Mention::Missing: return -2.0;
  }
  return -2.0;
}

EncodedFindingVector encode_vector(const FindingVector& vector, const FindingSchema& schema) {
  if (vector.assignments.size() != schema.size()) {
    throw Error(ErrorKind::SchemaMismatch,
                fmt::format("vector for '{}' has {} entries, schema has {}", vector.report_id,
                            vector.assignments.size(), schema.size()));
  }
  EncodedFindingVector out{vector.report_id, vector.source, {}};
  out.values.reserve(vector.assignments.size());
  for (Mention m : vector.assignments) out.values.push_back(encode_mention(m));
  return out;
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorKind::LengthMismatch,
                fmt::format("vectors of length {} and {}", u.size(), v.size()));
  }
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw Error(ErrorKind::ZeroVector, "cosine of a zero vector");
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

void EncodedStore::add(EncodedFindingVector vector) {
  auto key = std::make_pair(vector.report_id, vector.source);
  vectors_.insert_or_assign(std::move(key), std::move(vector));
}

const EncodedFindingVector* EncodedStore::find(const std::string& report_id,
                                               LabelSource source) const {
  const auto it = vectors_.find({report_id, source});
  return it == vectors_.end() ? nullptr : &it->second;
}

double gt_similarity(const std::string& a_id, const std::string& b_id, LabelSource source,
                     const EncodedStore& store) {
  const auto* a = store.find(a_id, source);
  const auto* b = store.find(b_id, source);
  if (!a || !b) {
    throw Error(ErrorKind::MissingEncoding,
                fmt::format("no {} encoding for '{}'", to_string(source), a ? b_id : a_id));
  }
  return cosine(a->values, b->values);
}

void write_encoded_csv(std::ostream& out, const FindingSchema& schema,
                       std::span<const EncodedFindingVector> vectors) {
  csv::Row header{"report_id", "source"};
  header.insert(header.end(), schema.names().begin(), schema.names().end());
  csv::write_row(out, header);
  for (const auto& v : vectors) {
    csv::Row row{v.report_id, std::string(to_string(v.source))};
    for (double x : v.values) row.push_back(fmt::format("{:.1f}", x));
    csv::write_row(out, row);
  }
}

}  // namespace radsim
