#pragma once

#include "odrpo/types.hpp"

#include <memory>

namespace odrpo {

struct StepResult {
    int next_state = 0;
    double reward = 0.0;
    bool terminal = false;  // reached a terminal state
    bool truncated = false; // hit the step limit

    bool done() const { return terminal || truncated; }
};

/// A tabular environment as a plain state machine. Instances own no RNG: all
/// randomness flows through the stream handed to reset/step, so one instance
/// per concurrent episode sampler is safe.
class Env {
  public:
    virtual ~Env() = default;

    const MdpSpec& spec() const { return spec_; }
    int state() const { return state_; }

    /// Draws a start state and zeroes the step counter.
    int reset(RngStream& rng);
    /// Advances one step. Throws std::logic_error if the episode is already
    /// over.
    StepResult step(int action, RngStream& rng);
    /// Samples the transition (next state, reward, terminal) from an
    /// arbitrary state without touching the episode in progress. Exposes P
    /// and r for verification against the documented tables.
    StepResult probe(int state, int action, RngStream& rng);

  protected:
    virtual int sample_start(RngStream& rng) = 0;
    virtual StepResult transition(int state, int action, RngStream& rng) = 0;

    MdpSpec spec_;

  private:
    int state_ = 0;
    int steps_taken_ = 0;
    bool episode_done_ = true;
};

/// Environments by string ID: "taxi", "nchain", "cliffwalking".
std::unique_ptr<Env> make_env(const std::string& id);

/// Samples `count` complete episodes with actions drawn from the policy.
/// Per-episode streams are split off `rng` up front, so the episode contents
/// do not depend on how episodes are interleaved.
std::vector<Trajectory> sample_trajectories(Env& env, const TabularPolicy& policy, int count,
                                            RngStream& rng);

} // namespace odrpo
