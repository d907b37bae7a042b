// Writes a seeded synthetic workspace for demos and smoke tests.

#include "vrag/common.hpp"
#include "vrag/synthetic.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Synthetic corpus, queries and config for the vrag pipeline", "vrag-synth"};
  vrag::synthetic::Options opts;
  std::string out = "synthetic";
  app.add_option("--out", out, "workspace directory");
  app.add_option("--seed", opts.seed, "generator seed");
  app.add_option("--dim", opts.dimension, "vector dimension");
  app.add_option("--corpus-videos", opts.corpus_videos_per_class, "corpus videos per label");
  app.add_option("--query-videos", opts.query_videos_per_class, "query videos per label");
  app.add_option("--frames", opts.frames_per_video, "frames per video");
  CLI11_PARSE(app, argc, argv);
  try {
    const auto ws = vrag::synthetic::write_workspace(out, opts);
    std::cout << "wrote " << ws.corpus_entries << " corpus entries and " << ws.query_frames
              << " query frames; config: " << ws.config.string() << "\n";
  } catch (const vrag::Error& e) {
    std::cerr << e.what() << "\n";
    return vrag::is_validation_error(e.code()) ? 1 : 2;
  }
  return 0;
}
