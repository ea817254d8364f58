#include "odrpo/env.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

namespace odrpo {

int Env::reset(RngStream& rng) {
    state_ = sample_start(rng);
    steps_taken_ = 0;
    episode_done_ = false;
    return state_;
}

StepResult Env::probe(int state, int action, RngStream& rng) {
    if (state < 0 || state >= spec_.n_states || action < 0 || action >= spec_.n_actions) {
        throw std::invalid_argument("Env::probe: state or action out of range");
    }
    return transition(state, action, rng);
}

StepResult Env::step(int action, RngStream& rng) {
    if (episode_done_) {
        throw std::logic_error("Env::step: episode is already done; call reset()");
    }
    if (action < 0 || action >= spec_.n_actions) {
        throw std::invalid_argument("Env::step: action out of range");
    }
    StepResult result = transition(state_, action, rng);
    ++steps_taken_;
    if (!result.terminal && steps_taken_ >= spec_.max_episode_steps) {
        result.truncated = true;
    }
    state_ = result.next_state;
    episode_done_ = result.done();
    return result;
}

namespace {

// 5x5 grid, 4 landmarks, passenger location in {R,G,Y,B,in-taxi}, four
// destinations; states encoded ((row*5+col)*5+passenger)*4+destination.
// Actions: 0 south, 1 north, 2 east, 3 west, 4 pickup, 5 dropoff.
class TaxiEnv final : public Env {
  public:
    TaxiEnv() {
        spec_ = {500, 6, 200, "taxi"};
    }

    static constexpr std::array<std::array<int, 2>, 4> kLandmarks{{{0, 0}, {0, 4}, {4, 0}, {4, 3}}};

    static int encode(int row, int col, int passenger, int destination) {
        return ((row * 5 + col) * 5 + passenger) * 4 + destination;
    }

    static void decode(int state, int& row, int& col, int& passenger, int& destination) {
        destination = state % 4;
        state /= 4;
        passenger = state % 5;
        state /= 5;
        col = state % 5;
        row = state / 5;
    }

    // Wall east of (row, col)?
    static bool wall_east(int row, int col) {
        if (row <= 1) {
            return col == 1;
        }
        if (row >= 3) {
            return col == 0 || col == 2;
        }
        return false;
    }

  protected:
    int sample_start(RngStream& rng) override {
        const int row = rng.uniform_int(5);
        const int col = rng.uniform_int(5);
        const int passenger = rng.uniform_int(4);
        int destination = rng.uniform_int(3);
        if (destination >= passenger) {
            ++destination; // uniform over destinations != passenger
        }
        return encode(row, col, passenger, destination);
    }

    StepResult transition(int state, int action, RngStream&) override {
        int row, col, passenger, destination;
        decode(state, row, col, passenger, destination);
        double reward = -1.0;
        bool terminal = false;
        switch (action) {
        case 0:
            row = std::min(row + 1, 4);
            break;
        case 1:
            row = std::max(row - 1, 0);
            break;
        case 2:
            if (col < 4 && !wall_east(row, col)) {
                ++col;
            }
            break;
        case 3:
            if (col > 0 && !wall_east(row, col - 1)) {
                --col;
            }
            break;
        case 4:
            if (passenger < 4 && kLandmarks[passenger][0] == row && kLandmarks[passenger][1] == col) {
                passenger = 4;
            } else {
                reward = -10.0;
            }
            break;
        case 5:
            if (passenger == 4 && kLandmarks[destination][0] == row &&
                kLandmarks[destination][1] == col) {
                passenger = destination;
                reward = 20.0;
                terminal = true;
            } else if (passenger == 4 && landmark_at(row, col) >= 0) {
                passenger = landmark_at(row, col);
            } else {
                reward = -10.0;
            }
            break;
        default:
            break;
        }
        return {encode(row, col, passenger, destination), reward, terminal, false};
    }

  private:
    static int landmark_at(int row, int col) {
        for (int k = 0; k < 4; ++k) {
            if (kLandmarks[k][0] == row && kLandmarks[k][1] == col) {
                return k;
            }
        }
        return -1;
    }
};

// Five-state chain; action 0 walks forward (big reward only at the end),
// action 1 jumps back to the start for a small reward; each step the action
// is flipped with the slip probability. No terminal state.
class NChainEnv final : public Env {
  public:
    NChainEnv() {
        spec_ = {5, 2, 1000, "nchain"};
    }

    static constexpr double kSlip = 0.2;
    static constexpr double kSmallReward = 2.0;
    static constexpr double kLargeReward = 10.0;

  protected:
    int sample_start(RngStream&) override { return 0; }

    StepResult transition(int state, int action, RngStream& rng) override {
        if (rng.uniform() < kSlip) {
            action = 1 - action;
        }
        if (action == 1) {
            return {0, kSmallReward, false, false};
        }
        if (state < spec_.n_states - 1) {
            return {state + 1, 0.0, false, false};
        }
        return {state, kLargeReward, false, false};
    }
};

// 4x12 grid; start bottom-left, goal bottom-right, the cells between them
// are the cliff. Stepping into the cliff costs -100 and teleports back to
// the start without ending the episode. Actions: 0 up, 1 right, 2 down,
// 3 left; moves clamp at the edges.
class CliffWalkingEnv final : public Env {
  public:
    CliffWalkingEnv() {
        spec_ = {48, 4, 1000, "cliffwalking"};
    }

    static constexpr int kCols = 12;
    static constexpr int kStart = 36;
    static constexpr int kGoal = 47;

    static bool is_cliff(int state) { return state > kStart && state < kGoal; }

  protected:
    int sample_start(RngStream&) override { return kStart; }

    StepResult transition(int state, int action, RngStream&) override {
        int row = state / kCols;
        int col = state % kCols;
        switch (action) {
        case 0:
            row = std::max(row - 1, 0);
            break;
        case 1:
            col = std::min(col + 1, kCols - 1);
            break;
        case 2:
            row = std::min(row + 1, 3);
            break;
        case 3:
            col = std::max(col - 1, 0);
            break;
        default:
            break;
        }
        const int next = row * kCols + col;
        if (is_cliff(next)) {
            return {kStart, -100.0, false, false};
        }
        return {next, -1.0, next == kGoal, false};
    }
};

} // namespace

std::unique_ptr<Env> make_env(const std::string& id) {
    if (id == "taxi") {
        return std::make_unique<TaxiEnv>();
    }
    if (id == "nchain") {
        return std::make_unique<NChainEnv>();
    }
    if (id == "cliffwalking") {
        return std::make_unique<CliffWalkingEnv>();
    }
    throw std::invalid_argument("make_env: unknown environment id '" + id + "'");
}

std::vector<Trajectory> sample_trajectories(Env& env, const TabularPolicy& policy, int count,
                                            RngStream& rng) {
    if (policy.n_states() != env.spec().n_states || policy.n_actions() != env.spec().n_actions) {
        throw std::invalid_argument("sample_trajectories: policy does not match environment");
    }
    std::vector<RngStream> streams;
    streams.reserve(count);
    for (int i = 0; i < count; ++i) {
        streams.push_back(rng.split());
    }
    std::vector<Trajectory> trajectories(count);
    for (int i = 0; i < count; ++i) {
        RngStream& episode_rng = streams[i];
        Trajectory& traj = trajectories[i];
        int state = env.reset(episode_rng);
        while (true) {
            const int action = policy.sample(state, episode_rng);
            const StepResult result = env.step(action, episode_rng);
            traj.steps.push_back({state, action, result.reward});
            if (result.done()) {
                traj.terminated = result.terminal;
                break;
            }
            state = result.next_state;
        }
    }
    return trajectories;
}

} // namespace odrpo
