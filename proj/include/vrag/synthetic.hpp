#pragma once

// Seeded synthetic workspace: a labelled corpus in the ingest file format,
// query frames from held-out videos, a video inventory, annotation inputs and
// a pipeline config that ties them together. Vectors sit in two well-separated
// label clusters so retrieval has signal.

#include <cstdint>
#include <filesystem>

namespace vrag::synthetic {

struct Options {
  std::uint64_t seed = 7;
  std::uint32_t dimension = 16;
  std::size_t corpus_videos_per_class = 6;
  std::size_t query_videos_per_class = 4;
  std::size_t frames_per_video = 3;
  double noise = 0.35;  // per-component amplitude relative to the cluster center
  std::size_t k = 5;
};

struct Workspace {
  std::filesystem::path root;
  std::filesystem::path corpus_dir;  // entries.jsonl + vectors.bin
  std::filesystem::path queries;
  std::filesystem::path inventory;
  std::filesystem::path annotate;
  std::filesystem::path scores;  // separable frame scores for `eval`
  std::filesystem::path config;
  std::size_t corpus_entries = 0;
  std::size_t query_frames = 0;
};

/// Writes every input file below `root` (created if needed). Identical options
/// give byte-identical files.
Workspace write_workspace(const std::filesystem::path& root, const Options& options = {});

}  // namespace vrag::synthetic
