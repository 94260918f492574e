#include "tomac/replay/buffer.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace tomac::replay
{

using numerics::ContractViolation;

double discounted_return(const EpisodeTrace & ep, int start, int end, double gamma)
{
  double total = 0.0;
  double discount = 1.0;
  for (int t = start; t <= end; ++t) {
    total += discount * ep.reward(t);
    discount *= gamma;
  }
  return total;
}

void AgentBuffer::push(MacroSegment segment)
{
  if (!segments_.empty() && !precedes(segments_.back(), segment)) {
    throw ContractViolation("segments must arrive in termination order");
  }
  pairs_ += static_cast<std::size_t>(segment.duration());
  segments_.push_back(std::move(segment));
  while (segments_.size() > capacity_) {
    pairs_ -= static_cast<std::size_t>(segments_.front().duration());
    segments_.pop_front();
  }
}

MacSjertBuffer::MacSjertBuffer(BufferConfig config, int state_size, int obs_size, int hidden_size)
: config_(config), state_size_(state_size), obs_size_(obs_size), hidden_size_(hidden_size)
{
  if (config_.num_agents <= 0 || config_.capacity == 0) {
    throw std::invalid_argument("buffer needs at least one agent and positive capacity");
  }
  for (int i = 0; i < config_.num_agents; ++i) {
    agents_.emplace_back(i, config_.capacity);
  }
  open_.resize(static_cast<std::size_t>(config_.num_agents));
}

void MacSjertBuffer::start_episode()
{
  if (current_) {
    throw ContractViolation("start_episode while an episode is open");
  }
  current_ = std::make_shared<EpisodeTrace>(config_.num_agents, state_size_, obs_size_, hidden_size_);
  std::fill(open_.begin(), open_.end(), Open{});
  pending_.clear();
}

void MacSjertBuffer::record_step(const StepRecord & record)
{
  if (!current_) {
    throw ContractViolation("record_step outside an episode");
  }
  if (current_->num_steps() > 0 && current_->done(current_->num_steps() - 1)) {
    throw ContractViolation("record_step after the episode finished");
  }
  const int step = current_->num_steps();
  for (std::size_t i = 0; i < open_.size(); ++i) {
    Open & o = open_[i];
    const bool starts = record.progress.at(i) == 0;
    if (starts && o.active) {
      throw ContractViolation("agent " + std::to_string(i) + " started a macro-action before the last one terminated");
    }
    if (!starts && !o.active) {
      throw ContractViolation("agent " + std::to_string(i) + " has no open segment");
    }
    if (o.active && record.actions.at(i) != o.macro_action) {
      throw ContractViolation("agent " + std::to_string(i) + " switched macro-action mid-segment");
    }
  }
  current_->append(record);
  for (std::size_t i = 0; i < open_.size(); ++i) {
    Open & o = open_[i];
    if (!o.active) {
      o = Open{true, step, record.actions[i]};
    }
    if (record.terminated[i]) {
      MacroSegment seg;
      seg.owner = static_cast<int>(i);
      seg.macro_action = o.macro_action;
      seg.start = o.start;
      seg.end = step;
      seg.reward = discounted_return(*current_, o.start, step, config_.gamma);
      seg.order = next_order_++;
      pending_.push_back(std::move(seg));
      o = Open{};
    }
  }
}

EpisodePtr MacSjertBuffer::end_episode(const ClosingFrame & closing)
{
  if (!current_) {
    throw ContractViolation("end_episode outside an episode");
  }
  const int last = current_->num_steps() - 1;
  // A horizon cut may leave segments open; they end with the episode.
  for (std::size_t i = 0; i < open_.size(); ++i) {
    if (open_[i].active) {
      MacroSegment seg;
      seg.owner = static_cast<int>(i);
      seg.macro_action = open_[i].macro_action;
      seg.start = open_[i].start;
      seg.end = last;
      seg.reward = discounted_return(*current_, seg.start, last, config_.gamma);
      seg.order = next_order_++;
      pending_.push_back(std::move(seg));
    }
  }
  current_->close(closing);
  EpisodePtr done = current_;
  for (MacroSegment & seg : pending_) {
    seg.episode = done;
    agents_[static_cast<std::size_t>(seg.owner)].push(std::move(seg));
  }
  pending_.clear();
  current_.reset();
  index_dirty_ = true;
  return done;
}

void MacSjertBuffer::restore_segment(MacroSegment segment)
{
  if (segment.owner < 0 || segment.owner >= config_.num_agents || !segment.episode) {
    throw ContractViolation("restored segment has no valid owner or episode");
  }
  next_order_ = std::max(next_order_, segment.order + 1);
  agents_[static_cast<std::size_t>(segment.owner)].push(std::move(segment));
  index_dirty_ = true;
}

void MacSjertBuffer::rebuild_index() const
{
  index_segments_.clear();
  index_prefix_.clear();
  std::size_t total = 0;
  for (const AgentBuffer & a : agents_) {
    for (const MacroSegment & s : a.segments()) {
      total += static_cast<std::size_t>(s.duration());
      index_segments_.push_back(&s);
      index_prefix_.push_back(total);
    }
  }
  index_dirty_ = false;
}

std::optional<std::vector<MicroTransition>> MacSjertBuffer::sample_micro(
  std::size_t batch, std::mt19937_64 & rng) const
{
  if (index_dirty_) {
    rebuild_index();
  }
  if (index_prefix_.empty()) {
    return std::nullopt;
  }
  std::uniform_int_distribution<std::size_t> pick(0, index_prefix_.back() - 1);
  std::vector<MicroTransition> out;
  out.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t k = pick(rng);
    const auto it = std::upper_bound(index_prefix_.begin(), index_prefix_.end(), k);
    const std::size_t seg_index = static_cast<std::size_t>(it - index_prefix_.begin());
    const MacroSegment & s = *index_segments_[seg_index];
    const std::size_t before = seg_index == 0 ? 0 : index_prefix_[seg_index - 1];
    out.push_back({s.episode, s.start + static_cast<int>(k - before)});
  }
  return out;
}

std::optional<std::vector<MacroTransition>> MacSjertBuffer::sample_macro(
  int agent, std::size_t batch, std::mt19937_64 & rng) const
{
  const auto & segs = agents_.at(static_cast<std::size_t>(agent)).segments();
  if (segs.empty()) {
    return std::nullopt;
  }
  std::uniform_int_distribution<std::size_t> pick(0, segs.size() - 1);
  std::vector<MacroTransition> out;
  out.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    out.push_back({segs[pick(rng)]});
  }
  return out;
}

// ----------------------------------------------------------------------------
// Serialization: manifest.txt plus episodes.bin and segments.bin, little-endian.

namespace
{

class BinaryWriter
{
public:
  explicit BinaryWriter(const std::filesystem::path & file)
  : out_(file, std::ios::binary)
  {
    if (!out_) {
      throw std::runtime_error("cannot write " + file.string());
    }
  }

  void i64(std::int64_t v)
  {
    std::uint64_t bits = static_cast<std::uint64_t>(v);
    raw(bits);
  }

  void f64(double v)
  {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof(bits));
    raw(bits);
  }

  template<typename Derived>
  void vec(const Eigen::MatrixBase<Derived> & v)
  {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      f64(v(i));
    }
  }

private:
  void raw(std::uint64_t bits)
  {
    unsigned char bytes[8];
    for (int b = 0; b < 8; ++b) {
      bytes[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xFFu);
    }
    out_.write(reinterpret_cast<const char *>(bytes), 8);
  }

  std::ofstream out_;
};

class BinaryReader
{
public:
  explicit BinaryReader(const std::filesystem::path & file)
  : in_(file, std::ios::binary), name_(file.string())
  {
    if (!in_) {
      throw std::runtime_error("cannot read " + name_);
    }
  }

  std::int64_t i64() {return static_cast<std::int64_t>(raw());}

  double f64()
  {
    const std::uint64_t bits = raw();
    double v = 0;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

  VectorXd vec(int n)
  {
    VectorXd v(n);
    for (int i = 0; i < n; ++i) {
      v(i) = f64();
    }
    return v;
  }

  bool at_end() {return in_.peek() == std::char_traits<char>::eof();}

private:
  std::uint64_t raw()
  {
    unsigned char bytes[8];
    if (!in_.read(reinterpret_cast<char *>(bytes), 8)) {
      throw std::runtime_error("truncated buffer file " + name_);
    }
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    }
    return bits;
  }

  std::ifstream in_;
  std::string name_;
};

void write_frame_common(BinaryWriter & w, const EpisodeTrace & ep, int frame)
{
  w.i64(ep.time(frame));
  w.vec(ep.state(frame));
  for (int i = 0; i < ep.num_agents(); ++i) {
    w.vec(ep.observation(frame, i));
    w.vec(ep.stale_observation(frame, i));
    w.vec(ep.hidden(frame, i));
    w.i64(ep.available(frame, i));
  }
}

}  // namespace

void save_buffer(const MacSjertBuffer & buffer, const std::filesystem::path & dir)
{
  if (buffer.episode_open()) {
    throw ContractViolation("cannot save a buffer with an open episode");
  }
  std::filesystem::create_directories(dir);
  std::unordered_map<const EpisodeTrace *, std::int64_t> ids;
  std::vector<const EpisodeTrace *> episodes;
  std::vector<const MacroSegment *> segments;
  for (int a = 0; a < buffer.config().num_agents; ++a) {
    for (const MacroSegment & s : buffer.agent(a).segments()) {
      segments.push_back(&s);
      if (ids.emplace(s.episode.get(), static_cast<std::int64_t>(episodes.size())).second) {
        episodes.push_back(s.episode.get());
      }
    }
  }

  {
    BinaryWriter w(dir / "episodes.bin");
    for (const EpisodeTrace * ep : episodes) {
      w.i64(ep->num_steps());
      for (int t = 0; t < ep->num_steps(); ++t) {
        write_frame_common(w, *ep, t);
        for (int i = 0; i < ep->num_agents(); ++i) {
          w.i64(ep->action(t, i));
          w.i64(ep->progress(t, i));
          w.i64(ep->terminated(t, i));
        }
        w.f64(ep->reward(t));
        w.i64(ep->done(t) ? 1 : 0);
      }
      write_frame_common(w, *ep, ep->num_steps());
    }
  }
  {
    BinaryWriter w(dir / "segments.bin");
    for (const MacroSegment * s : segments) {
      w.i64(s->owner);
      w.i64(s->macro_action);
      w.i64(s->start);
      w.i64(s->end);
      w.f64(s->reward);
      w.i64(static_cast<std::int64_t>(s->order));
      w.i64(ids.at(s->episode.get()));
    }
  }
  std::ofstream manifest(dir / "manifest.txt");
  manifest.precision(17);
  manifest << "format_version=" << kBufferFormatVersion << "\n";
  manifest << "gamma=" << buffer.config().gamma << "\n";
  manifest << "capacity=" << buffer.config().capacity << "\n";
  manifest << "num_agents=" << buffer.config().num_agents << "\n";
  manifest << "state_size=" << buffer.state_size() << "\n";
  manifest << "obs_size=" << buffer.obs_size() << "\n";
  manifest << "hidden_size=" << buffer.hidden_size() << "\n";
  manifest << "episodes=" << episodes.size() << "\n";
  manifest << "segments=" << segments.size() << "\n";
}

MacSjertBuffer load_buffer(const std::filesystem::path & dir, double expected_gamma)
{
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) {
    throw std::runtime_error("missing buffer manifest in " + dir.string());
  }
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(manifest, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) {
      kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  auto get = [&](const std::string & key) {
      auto it = kv.find(key);
      if (it == kv.end()) {
        throw std::runtime_error("buffer manifest lacks " + key);
      }
      return it->second;
    };
  if (std::stoi(get("format_version")) != kBufferFormatVersion) {
    throw std::runtime_error("unsupported buffer format_version " + get("format_version"));
  }
  BufferConfig config;
  config.gamma = std::stod(get("gamma"));
  if (config.gamma != expected_gamma) {
    throw std::runtime_error(
            "buffer was recorded with gamma=" + get("gamma") + "; stored returns are invalid for another gamma");
  }
  config.capacity = std::stoull(get("capacity"));
  config.num_agents = std::stoi(get("num_agents"));
  const int state_size = std::stoi(get("state_size"));
  const int obs_size = std::stoi(get("obs_size"));
  const int hidden_size = std::stoi(get("hidden_size"));
  const std::size_t n_episodes = std::stoull(get("episodes"));
  const std::size_t n_segments = std::stoull(get("segments"));
  const int n = config.num_agents;

  MacSjertBuffer buffer(config, state_size, obs_size, hidden_size);
  std::vector<EpisodePtr> episodes;
  {
    BinaryReader r(dir / "episodes.bin");
    auto read_common = [&](int & t, VectorXd & state, std::vector<VectorXd> & obs,
        std::vector<VectorXd> & stale, std::vector<VectorXd> & hidden,
        std::vector<std::uint32_t> & available) {
        t = static_cast<int>(r.i64());
        state = r.vec(state_size);
        for (int i = 0; i < n; ++i) {
          obs.push_back(r.vec(obs_size));
          stale.push_back(r.vec(obs_size));
          hidden.push_back(r.vec(hidden_size));
          available.push_back(static_cast<std::uint32_t>(r.i64()));
        }
      };
    for (std::size_t e = 0; e < n_episodes; ++e) {
      auto ep = std::make_shared<EpisodeTrace>(n, state_size, obs_size, hidden_size);
      const auto steps = r.i64();
      for (std::int64_t t = 0; t < steps; ++t) {
        StepRecord rec;
        read_common(rec.t, rec.state, rec.observations, rec.stale_observations, rec.hidden, rec.available);
        for (int i = 0; i < n; ++i) {
          rec.actions.push_back(static_cast<int>(r.i64()));
          rec.progress.push_back(static_cast<int>(r.i64()));
          rec.terminated.push_back(static_cast<int>(r.i64()));
        }
        rec.reward = r.f64();
        rec.done = r.i64() != 0;
        ep->append(rec);
      }
      ClosingFrame closing;
      read_common(
        closing.t, closing.state, closing.observations, closing.stale_observations, closing.hidden,
        closing.available);
      ep->close(closing);
      episodes.push_back(ep);
    }
    if (!r.at_end()) {
      throw std::runtime_error("trailing bytes in episodes.bin");
    }
  }
  {
    BinaryReader r(dir / "segments.bin");
    std::vector<MacroSegment> segs;
    for (std::size_t k = 0; k < n_segments; ++k) {
      MacroSegment s;
      s.owner = static_cast<int>(r.i64());
      s.macro_action = static_cast<int>(r.i64());
      s.start = static_cast<int>(r.i64());
      s.end = static_cast<int>(r.i64());
      s.reward = r.f64();
      s.order = static_cast<std::uint64_t>(r.i64());
      s.episode = episodes.at(static_cast<std::size_t>(r.i64()));
      segs.push_back(std::move(s));
    }
    if (!r.at_end()) {
      throw std::runtime_error("trailing bytes in segments.bin");
    }
    for (MacroSegment & s : segs) {
      buffer.restore_segment(std::move(s));
    }
  }
  return buffer;
}

// ----------------------------------------------------------------------------

std::vector<int> decision_points(const EpisodeTrace & ep)
{
  std::vector<int> points;
  if (ep.num_steps() == 0) {
    return points;
  }
  points.push_back(0);
  for (int t = 0; t + 1 < ep.num_steps(); ++t) {
    for (int i = 0; i < ep.num_agents(); ++i) {
      if (ep.terminated(t, i)) {
        points.push_back(t + 1);
        break;
      }
    }
  }
  return points;
}

void MacJertBuffer::add_episode(const EpisodePtr & episode)
{
  if (!episode || !episode->closed()) {
    throw ContractViolation("Mac-JERT needs complete episodes");
  }
  const std::vector<int> points = decision_points(*episode);
  for (std::size_t k = 0; k < points.size(); ++k) {
    JertTransition tr;
    tr.episode = episode;
    tr.start = points[k];
    tr.end = k + 1 < points.size() ? points[k + 1] - 1 : episode->num_steps() - 1;
    tr.reward = discounted_return(*episode, tr.start, tr.end, gamma_);
    transitions_.push_back(std::move(tr));
  }
  while (transitions_.size() > capacity_) {
    transitions_.pop_front();
  }
}

std::optional<std::vector<JertTransition>> MacJertBuffer::sample(
  std::size_t batch, std::mt19937_64 & rng) const
{
  if (transitions_.empty()) {
    return std::nullopt;
  }
  std::uniform_int_distribution<std::size_t> pick(0, transitions_.size() - 1);
  std::vector<JertTransition> out;
  out.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    out.push_back(transitions_[pick(rng)]);
  }
  return out;
}

double MacJertBuffer::credited_reward(const EpisodeTrace & ep, int agent_end, double gamma)
{
  int start = 0;
  for (int d : decision_points(ep)) {
    if (d <= agent_end) {
      start = d;
    }
  }
  return discounted_return(ep, start, agent_end, gamma);
}

MacJertBuffer as_macjert(const std::vector<EpisodePtr> & episodes, double gamma, std::size_t capacity)
{
  MacJertBuffer buffer(gamma, capacity);
  for (const EpisodePtr & ep : episodes) {
    buffer.add_episode(ep);
  }
  return buffer;
}

}  // namespace tomac::replay
