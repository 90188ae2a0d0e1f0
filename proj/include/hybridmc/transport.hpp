#pragma once

#include "hybridmc/adjoint.hpp"
#include "hybridmc/scene.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace hmc {

enum class ChainKind { Analog, SurvivalBiased, PureSai, Heuristic, Regularized };

ChainKind parse_chain(const std::string& name);
const char* to_string(ChainKind chain);
inline bool needs_adjoint(ChainKind c) { return c == ChainKind::PureSai || c == ChainKind::Regularized; }

struct ChainParams {
  ChainKind chain = ChainKind::Analog;
  double q_s = 1.0;
  double q_v = 1.0;
  double weight_cutoff = 1e-12;
  int max_path_length = 10000;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

enum class VertexKind : std::uint8_t { Source, Volume, Boundary };

struct PathVertex {
  Vec2 position;
  int segment = -1;  // boundary segment, -1 in the volume or at the source
  VertexKind kind = VertexKind::Boundary;
  Vec2 direction = Vec2::Zero();  // outgoing; zero at the terminal vertex
};

enum class Termination { Detector, Absorbed, Escaped, WeightCutoff, LengthCap, DeadRow };

const char* to_string(Termination t);

struct Path {
  std::vector<PathVertex> vertices;
  double weight = 0.0;
  Termination status = Termination::Absorbed;
  ChainKind chain = ChainKind::Analog;
  bool sai_branch = false;     // regularized chain: generated by the SAI branch
  double log_density = 0.0;    // log density of the generating sampler, accumulated while sampling
  double lost_weight = 0.0;    // weight dropped by the cutoff or the length cap

  bool detected() const { return status == Termination::Detector; }
  int volume_vertices() const;
  void clear();
};

/// Runs the chains of one configuration. Holds scratch space, so one instance
/// per thread.
class Transport {
 public:
  Transport(const Scene& scene, const AdjointTable* adjoint, ChainParams params);

  const ChainParams& params() const { return params_; }

  /// Dispatches on params().chain.
  void run(Rng& rng, Path& path);

  void run_analog(Rng& rng, Path& path);
  void run_survival_biased(Rng& rng, Path& path);
  void run_pure_sai(Rng& rng, Path& path);
  void run_heuristic(Rng& rng, Path& path);
  void run_regularized(Rng& rng, Path& path);

  // Log path densities over the common dominating measure
  // dx0 x (angle at each direction change) x (length at each volume vertex).
  double log_density_analog(const Path& path) const;
  double log_density_heu(const Path& path) const;
  double log_density_sai(const Path& path) const;

  /// Angular interval subtended by the unoccluded detector as seen from r.
  struct Cone {
    bool open = false;
    Vec2 base = Vec2::Zero();  // direction to the first endpoint
    double span = 0.0;         // signed angle to the second endpoint
    bool contains(const Vec2& v) const;
    double density() const { return open ? 1.0 / std::abs(span) : 0.0; }
  };
  Cone detector_cone(const Vec2& r) const;
  /// Mixture probability of phase sampling at a volume vertex.
  double q_heu(const Vec2& r, const Vec2& v_in, const Cone& cone) const;
  /// Heuristic direction density at a volume vertex.
  double k_heu(const Vec2& r, const Vec2& v_in, const Vec2& v_out) const;

 private:
  void begin(Path& path, ChainKind chain) const;
  bool capped(Path& path) const;
  void scatter_chain(Rng& rng, Path& path, bool heuristic);
  void sai_chain(Rng& rng, Path& path);

  const Scene& scene_;
  const AdjointTable* adjoint_;
  ChainParams params_;
  mutable LaunchRow row_;
};

Path run_analog(const Scene& scene, Rng& rng);
Path run_survival_biased(const Scene& scene, Rng& rng);
Path run_pure_sai(const Scene& scene, const AdjointTable& adjoint, Rng& rng);
Path run_heuristic(const Scene& scene, double q_v, Rng& rng);
Path run_regularized_sai(const Scene& scene, const AdjointTable& adjoint, const ChainParams& params,
                         Rng& rng);

double density_analog(const Scene& scene, const Path& path);
double density_heu(const Scene& scene, double q_v, const Path& path);
double density_sai(const Scene& scene, const AdjointTable& adjoint, const Path& path);

void write_trace_header(std::ostream& out);
/// One row per vertex: path,vertex,x,y,kind,segment,weight,status
void write_trace(std::ostream& out, std::size_t index, const Path& path);

}  // namespace hmc
