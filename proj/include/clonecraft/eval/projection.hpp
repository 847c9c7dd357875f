#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "clonecraft/core/matrix.hpp"

namespace clonecraft::eval {

struct Projection {
  MatrixD coords;  // [n, 2]
  bool degenerate = false;
};

// Top-two principal components of the centred embeddings. Axis signs are
// fixed so the largest-magnitude loading is positive. Zero variance gives all
// points at the origin with degenerate set. ProtocolError for n < 3 or
// ragged input.
Projection project_2d(const std::vector<std::vector<float>>& embeddings);

// id,speaker,x,y
void write_projection_csv(const std::filesystem::path& path, const std::vector<std::string>& ids,
                          const std::vector<std::string>& speakers, const Projection& p);
// id,speaker,e0,e1,... for external projectors
void write_embeddings_csv(const std::filesystem::path& path, const std::vector<std::string>& ids,
                          const std::vector<std::string>& speakers,
                          const std::vector<std::vector<float>>& embeddings);

}  // namespace clonecraft::eval
