#include "deguv/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace deguv {
namespace {

constexpr char kMagic[8] = {'D', 'G', 'U', 'V', 'C', 'K', 'P', 'T'};

std::size_t dtype_size(Dtype d) {
    switch (d) {
        case Dtype::F32: return 4;
        case Dtype::I64: return 8;
        case Dtype::U64: return 8;
        case Dtype::U8: return 1;
    }
    throw DataError("checkpoint: unknown dtype");
}

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw DataError("checkpoint: truncated file");
    return v;
}

void write_entry_header(std::ostream& out, const std::string& name, Dtype dt,
                        const std::vector<std::int64_t>& shape) {
    write_pod<std::uint32_t>(out, std::uint32_t(name.size()));
    out.write(name.data(), std::streamsize(name.size()));
    write_pod<std::uint8_t>(out, std::uint8_t(dt));
    write_pod<std::uint32_t>(out, std::uint32_t(shape.size()));
    for (std::int64_t d : shape) write_pod<std::int64_t>(out, d);
}

struct EntryHeader {
    std::string name;
    Dtype dtype;
    std::vector<std::int64_t> shape;
    std::int64_t count;
    std::size_t payload_bytes;
};

EntryHeader read_entry_header(std::istream& in) {
    EntryHeader h;
    auto name_len = read_pod<std::uint32_t>(in);
    if (name_len > 4096) throw DataError("checkpoint: implausible entry name length");
    h.name.resize(name_len);
    in.read(h.name.data(), name_len);
    if (!in) throw DataError("checkpoint: truncated file");
    auto dt = read_pod<std::uint8_t>(in);
    if (dt > std::uint8_t(Dtype::U8)) throw DataError("checkpoint: unknown dtype");
    h.dtype = Dtype(dt);
    auto ndim = read_pod<std::uint32_t>(in);
    if (ndim > 16) throw DataError("checkpoint: implausible rank");
    h.count = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
        std::int64_t d = read_pod<std::int64_t>(in);
        if (d < 0) throw DataError("checkpoint: negative dimension");
        h.shape.push_back(d);
        h.count *= d;
    }
    h.payload_bytes = std::size_t(h.count) * dtype_size(h.dtype);
    return h;
}

struct FileHeader {
    std::uint32_t version;
    std::uint64_t config_hash;
    std::int64_t step;
    std::uint32_t n_entries;
};

void write_file_header(std::ostream& out, const FileHeader& h) {
    out.write(kMagic, sizeof kMagic);
    write_pod(out, h.version);
    write_pod(out, h.config_hash);
    write_pod(out, h.step);
    write_pod(out, h.n_entries);
}

FileHeader read_file_header(std::istream& in) {
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw DataError("checkpoint: bad magic (not a checkpoint file)");
    FileHeader h;
    h.version = read_pod<std::uint32_t>(in);
    if (h.version != Checkpoint::kVersion)
        throw DataError("checkpoint: unsupported format version " + std::to_string(h.version));
    h.config_hash = read_pod<std::uint64_t>(in);
    h.step = read_pod<std::int64_t>(in);
    h.n_entries = read_pod<std::uint32_t>(in);
    return h;
}

}  // namespace

std::int64_t CheckpointEntry::count() const {
    std::int64_t n = 1;
    for (std::int64_t d : shape) n *= d;
    return n;
}

const float* CheckpointEntry::f32() const {
    if (dtype != Dtype::F32) throw DataError("checkpoint: entry " + name + " is not f32");
    return reinterpret_cast<const float*>(bytes.data());
}

const std::int64_t* CheckpointEntry::i64() const {
    if (dtype != Dtype::I64) throw DataError("checkpoint: entry " + name + " is not i64");
    return reinterpret_cast<const std::int64_t*>(bytes.data());
}

const std::uint64_t* CheckpointEntry::u64() const {
    if (dtype != Dtype::U64) throw DataError("checkpoint: entry " + name + " is not u64");
    return reinterpret_cast<const std::uint64_t*>(bytes.data());
}

CheckpointEntry& Checkpoint::add(const std::string& name, Dtype dt,
                                 std::vector<std::int64_t> shape) {
    if (index_.count(name)) throw DataError("checkpoint: duplicate entry " + name);
    CheckpointEntry e;
    e.name = name;
    e.dtype = dt;
    e.shape = std::move(shape);
    e.bytes.resize(std::size_t(e.count()) * dtype_size(dt));
    index_[name] = entries_.size();
    entries_.push_back(std::move(e));
    return entries_.back();
}

void Checkpoint::put_f32(const std::string& name, const float* p, std::vector<std::int64_t> shape) {
    CheckpointEntry& e = add(name, Dtype::F32, std::move(shape));
    std::memcpy(e.bytes.data(), p, e.bytes.size());
}

void Checkpoint::put_i64(const std::string& name, std::int64_t v) {
    CheckpointEntry& e = add(name, Dtype::I64, {});
    std::memcpy(e.bytes.data(), &v, sizeof v);
}

void Checkpoint::put_u64(const std::string& name, std::uint64_t v) {
    CheckpointEntry& e = add(name, Dtype::U64, {});
    std::memcpy(e.bytes.data(), &v, sizeof v);
}

void Checkpoint::put_u8(const std::string& name, const std::uint8_t* p,
                        std::vector<std::int64_t> shape) {
    CheckpointEntry& e = add(name, Dtype::U8, std::move(shape));
    std::memcpy(e.bytes.data(), p, e.bytes.size());
}

void Checkpoint::put_text(const std::string& name, const std::string& text) {
    put_u8(name, reinterpret_cast<const std::uint8_t*>(text.data()),
           {std::int64_t(text.size())});
}

void Checkpoint::put_i64_array(const std::string& name, const std::int64_t* p,
                               std::vector<std::int64_t> shape) {
    CheckpointEntry& e = add(name, Dtype::I64, std::move(shape));
    std::memcpy(e.bytes.data(), p, e.bytes.size());
}

void Checkpoint::put_u64_array(const std::string& name, const std::uint64_t* p,
                               std::vector<std::int64_t> shape) {
    CheckpointEntry& e = add(name, Dtype::U64, std::move(shape));
    std::memcpy(e.bytes.data(), p, e.bytes.size());
}

bool Checkpoint::has(const std::string& name) const { return index_.count(name) != 0; }

const CheckpointEntry& Checkpoint::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw DataError("checkpoint: missing entry " + name);
    return entries_[it->second];
}

std::int64_t Checkpoint::get_i64(const std::string& name) const {
    const CheckpointEntry& e = at(name);
    if (e.count() != 1) throw DataError("checkpoint: " + name + " is not a scalar");
    return *e.i64();
}

std::uint64_t Checkpoint::get_u64(const std::string& name) const {
    const CheckpointEntry& e = at(name);
    if (e.count() != 1) throw DataError("checkpoint: " + name + " is not a scalar");
    return *e.u64();
}

std::string Checkpoint::get_text(const std::string& name) const {
    const CheckpointEntry& e = at(name);
    if (e.dtype != Dtype::U8) throw DataError("checkpoint: " + name + " is not text");
    return std::string(reinterpret_cast<const char*>(e.bytes.data()), e.bytes.size());
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    write_file_header(out, {version, config_hash, step, std::uint32_t(entries_.size())});
    for (const CheckpointEntry& e : entries_) {
        write_entry_header(out, e.name, e.dtype, e.shape);
        out.write(reinterpret_cast<const char*>(e.bytes.data()), std::streamsize(e.bytes.size()));
    }
    out.flush();
    if (!out) throw IoError("checkpoint write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint: " + path);
    FileHeader h = read_file_header(in);
    Checkpoint ck;
    ck.version = h.version;
    ck.config_hash = h.config_hash;
    ck.step = h.step;
    for (std::uint32_t i = 0; i < h.n_entries; ++i) {
        EntryHeader eh = read_entry_header(in);
        CheckpointEntry& e = ck.add(eh.name, eh.dtype, eh.shape);
        in.read(reinterpret_cast<char*>(e.bytes.data()), std::streamsize(e.bytes.size()));
        if (!in) throw DataError("checkpoint: truncated payload for " + eh.name);
    }
    return ck;
}

namespace {

struct ParamGroup {
    std::string prefix;
    std::vector<Param*> params;
};

std::vector<ParamGroup> param_groups(DeGuVAgent& a) {
    return {
        {"masker", a.masker().params()},
        {"enc", a.encoder().params()},
        {"enc_tgt", a.encoder_target().params()},
        {"actor", a.actor().params()},
        {"critic", a.critic().params()},
        {"critic_tgt", a.critic_target().params()},
        {"ent", {&a.entropy_param()}},
    };
}

struct AdamRef {
    std::string key;
    Adam* opt;
};

std::vector<AdamRef> adam_refs(DeGuVAgent& a) {
    return {
        {"actor", &a.actor_adam()},
        {"critic", &a.critic_adam()},
        {"aux", &a.aux_adam()},
        {"ent", &a.entropy_adam()},
    };
}

std::vector<std::int64_t> entry_shape(const Param& p) {
    std::vector<std::int64_t> s;
    for (int d : p.value.shape()) s.push_back(d);
    return s;
}

}  // namespace

Checkpoint make_agent_checkpoint(DeGuVAgent& agent, std::int64_t step, TrainCursor cursor) {
    Checkpoint ck;
    ck.config_hash = agent.config().compat_hash();
    ck.step = step;
    ck.put_text("config", agent.config().canonical());
    ck.put_i64("update_count", agent.update_count());
    ck.put_i64("cursor.step", cursor.step);
    ck.put_i64("cursor.episode", cursor.episode);

    for (auto& g : param_groups(agent))
        for (Param* p : g.params)
            ck.put_f32(g.prefix + "/" + p->name, p->value.data(), entry_shape(*p));

    for (auto& a : adam_refs(agent)) {
        auto state = a.opt->export_state();
        ck.put_i64("adam/" + a.key + "/t", a.opt->t());
        ck.put_i64("adam/" + a.key + "/n", std::int64_t(state.size()));
        for (std::size_t i = 0; i < state.size(); ++i)
            ck.put_f32("adam/" + a.key + "/s" + std::to_string(i), state[i].data(),
                       {std::int64_t(state[i].size())});
    }
    return ck;
}

void restore_agent(const Checkpoint& ck, DeGuVAgent& agent) {
    for (auto& g : param_groups(agent)) {
        for (Param* p : g.params) {
            const CheckpointEntry& e = ck.at(g.prefix + "/" + p->name);
            if (e.count() != p->value.size())
                throw DataError("checkpoint: size mismatch for " + e.name);
            std::memcpy(p->value.data(), e.f32(), std::size_t(e.count()) * sizeof(float));
            p->grad.zero();
        }
    }
    for (auto& a : adam_refs(agent)) {
        std::int64_t t = ck.get_i64("adam/" + a.key + "/t");
        std::int64_t n = ck.get_i64("adam/" + a.key + "/n");
        std::vector<std::vector<float>> state;
        state.reserve(std::size_t(n));
        for (std::int64_t i = 0; i < n; ++i) {
            const CheckpointEntry& e = ck.at("adam/" + a.key + "/s" + std::to_string(i));
            state.emplace_back(e.f32(), e.f32() + e.count());
        }
        a.opt->import_state(t, state);
    }
    agent.set_update_count(ck.get_i64("update_count"));
}

TrainCursor checkpoint_cursor(const Checkpoint& ck) {
    return {ck.get_i64("cursor.step"), ck.get_i64("cursor.episode")};
}

void embed_replay(Checkpoint& ck, const ReplayBuffer& rb) {
    const std::int64_t n = rb.size();
    const std::int64_t frame_rgb = std::int64_t(rb.h()) * rb.w() * 3;
    const std::int64_t frame_depth = std::int64_t(rb.h()) * rb.w();

    ck.put_i64("replay/capacity", rb.capacity());
    ck.put_i64("replay/k", rb.k());
    ck.put_i64("replay/h", rb.h());
    ck.put_i64("replay/w", rb.w());
    ck.put_i64("replay/filled", n);
    ck.put_u64("replay/episode_counter", rb.episode_counter());
    ck.put_i64("replay/step_counter", rb.step_counter());
    ck.put_i64("replay/episode_open", rb.episode_open() ? 1 : 0);
    ck.put_i64("replay/last_was_done", rb.last_was_done() ? 1 : 0);

    const std::size_t un = std::size_t(n);
    std::vector<std::uint8_t> rgb(un * std::size_t(frame_rgb));
    std::vector<float> depth(un * std::size_t(frame_depth));
    std::vector<float> action(un * 3);
    std::vector<float> reward(un);
    std::vector<std::uint8_t> done(un), terminal(un);
    std::vector<std::uint64_t> episode(un);
    std::vector<std::int64_t> step(un);
    for (std::int64_t i = 0; i < n; ++i) {
        ReplayBuffer::SlotView s = rb.slot(i);
        std::memcpy(rgb.data() + std::size_t(i * frame_rgb), s.rgb, std::size_t(frame_rgb));
        std::memcpy(depth.data() + std::size_t(i * frame_depth), s.depth,
                    std::size_t(frame_depth) * sizeof(float));
        for (int c = 0; c < 3; ++c) action[std::size_t(i) * 3 + c] = s.action[std::size_t(c)];
        reward[std::size_t(i)] = s.reward;
        done[std::size_t(i)] = s.done ? 1 : 0;
        terminal[std::size_t(i)] = s.terminal ? 1 : 0;
        episode[std::size_t(i)] = s.episode;
        step[std::size_t(i)] = s.step;
    }
    ck.put_u8("replay/rgb", rgb.data(), {n, frame_rgb});
    ck.put_f32("replay/depth", depth.data(), {n, frame_depth});
    ck.put_f32("replay/action", action.data(), {n, 3});
    ck.put_f32("replay/reward", reward.data(), {n});
    ck.put_u8("replay/done", done.data(), {n});
    ck.put_u8("replay/terminal", terminal.data(), {n});
    ck.put_u64_array("replay/episode", episode.data(), {n});
    ck.put_i64_array("replay/step", step.data(), {n});
}

bool has_replay(const Checkpoint& ck) { return ck.has("replay/filled"); }

std::unique_ptr<ReplayBuffer> restore_replay(const Checkpoint& ck) {
    if (!has_replay(ck)) return nullptr;
    const std::int64_t cap = ck.get_i64("replay/capacity");
    const int k = int(ck.get_i64("replay/k"));
    const int h = int(ck.get_i64("replay/h"));
    const int w = int(ck.get_i64("replay/w"));
    const std::int64_t n = ck.get_i64("replay/filled");
    auto rb = std::make_unique<ReplayBuffer>(cap, k, h, w);

    const std::int64_t frame_rgb = std::int64_t(h) * w * 3;
    const std::int64_t frame_depth = std::int64_t(h) * w;
    const CheckpointEntry& rgb = ck.at("replay/rgb");
    const CheckpointEntry& depth = ck.at("replay/depth");
    const CheckpointEntry& action = ck.at("replay/action");
    const CheckpointEntry& reward = ck.at("replay/reward");
    const CheckpointEntry& done = ck.at("replay/done");
    const CheckpointEntry& terminal = ck.at("replay/terminal");
    const CheckpointEntry& episode = ck.at("replay/episode");
    const CheckpointEntry& step = ck.at("replay/step");
    if (rgb.count() != n * frame_rgb || depth.count() != n * frame_depth ||
        action.count() != n * 3 || reward.count() != n || done.count() != n ||
        terminal.count() != n || episode.count() != n || step.count() != n)
        throw DataError("checkpoint: replay snapshot entries disagree about the slot count");

    for (std::int64_t i = 0; i < n; ++i) {
        std::array<float, 3> a{action.f32()[i * 3], action.f32()[i * 3 + 1],
                               action.f32()[i * 3 + 2]};
        rb->restore_slot(rgb.u8() + i * frame_rgb, depth.f32() + i * frame_depth, a,
                         reward.f32()[i], done.u8()[i] != 0, terminal.u8()[i] != 0,
                         episode.u64()[i], step.i64()[i]);
    }
    rb->restore_state(ck.get_u64("replay/episode_counter"), ck.get_i64("replay/step_counter"),
                      ck.get_i64("replay/episode_open") != 0,
                      ck.get_i64("replay/last_was_done") != 0);
    return rb;
}

void save_replay_snapshot(const ReplayBuffer& rb, const std::string& path,
                          std::uint64_t config_hash, std::int64_t step) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    const std::int64_t n = rb.size();
    const std::int64_t frame_rgb = std::int64_t(rb.h()) * rb.w() * 3;
    const std::int64_t frame_depth = std::int64_t(rb.h()) * rb.w();

    write_file_header(out, {Checkpoint::kVersion, config_hash, step, 17});
    auto scalar_i64 = [&](const char* name, std::int64_t v) {
        write_entry_header(out, name, Dtype::I64, {});
        write_pod(out, v);
    };
    scalar_i64("replay/capacity", rb.capacity());
    scalar_i64("replay/k", rb.k());
    scalar_i64("replay/h", rb.h());
    scalar_i64("replay/w", rb.w());
    scalar_i64("replay/filled", n);
    write_entry_header(out, "replay/episode_counter", Dtype::U64, {});
    write_pod(out, rb.episode_counter());
    scalar_i64("replay/step_counter", rb.step_counter());
    scalar_i64("replay/episode_open", rb.episode_open() ? 1 : 0);
    scalar_i64("replay/last_was_done", rb.last_was_done() ? 1 : 0);

    write_entry_header(out, "replay/rgb", Dtype::U8, {n, frame_rgb});
    for (std::int64_t i = 0; i < n; ++i)
        out.write(reinterpret_cast<const char*>(rb.slot(i).rgb), std::streamsize(frame_rgb));
    write_entry_header(out, "replay/depth", Dtype::F32, {n, frame_depth});
    for (std::int64_t i = 0; i < n; ++i)
        out.write(reinterpret_cast<const char*>(rb.slot(i).depth),
                  std::streamsize(frame_depth) * 4);

    write_entry_header(out, "replay/action", Dtype::F32, {n, 3});
    for (std::int64_t i = 0; i < n; ++i) {
        auto a = rb.slot(i).action;
        out.write(reinterpret_cast<const char*>(a.data()), 12);
    }
    write_entry_header(out, "replay/reward", Dtype::F32, {n});
    for (std::int64_t i = 0; i < n; ++i) write_pod(out, rb.slot(i).reward);
    write_entry_header(out, "replay/done", Dtype::U8, {n});
    for (std::int64_t i = 0; i < n; ++i) write_pod<std::uint8_t>(out, rb.slot(i).done ? 1 : 0);
    write_entry_header(out, "replay/terminal", Dtype::U8, {n});
    for (std::int64_t i = 0; i < n; ++i) write_pod<std::uint8_t>(out, rb.slot(i).terminal ? 1 : 0);
    write_entry_header(out, "replay/episode", Dtype::U64, {n});
    for (std::int64_t i = 0; i < n; ++i) write_pod(out, rb.slot(i).episode);
    write_entry_header(out, "replay/step", Dtype::I64, {n});
    for (std::int64_t i = 0; i < n; ++i) write_pod(out, rb.slot(i).step);

    out.flush();
    if (!out) throw IoError("replay snapshot write failed: " + path);
}

std::unique_ptr<ReplayBuffer> load_replay_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read replay snapshot: " + path);
    FileHeader fh = read_file_header(in);

    struct Located {
        EntryHeader h;
        std::streampos offset;
    };
    std::map<std::string, Located> loc;
    std::map<std::string, std::vector<std::uint8_t>> small;
    constexpr std::size_t kSmall = std::size_t(32) << 20;
    for (std::uint32_t i = 0; i < fh.n_entries; ++i) {
        EntryHeader eh = read_entry_header(in);
        std::streampos pos = in.tellg();
        const std::string name = eh.name;
        if (eh.payload_bytes <= kSmall) {
            std::vector<std::uint8_t> buf(eh.payload_bytes);
            in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
            if (!in) throw DataError("checkpoint: truncated payload for " + name);
            small[name] = std::move(buf);
        } else {
            in.seekg(std::streamoff(eh.payload_bytes), std::ios::cur);
            if (!in) throw DataError("checkpoint: truncated payload for " + name);
        }
        loc[name] = {std::move(eh), pos};
    }
    auto need = [&](const char* name) -> const Located& {
        auto it = loc.find(name);
        if (it == loc.end()) throw DataError("replay snapshot: missing entry " + std::string(name));
        return it->second;
    };
    auto scalar_i64 = [&](const char* name) {
        const auto& s = small.at(need(name).h.name);
        if (s.size() != 8) throw DataError("replay snapshot: bad scalar " + std::string(name));
        std::int64_t v;
        std::memcpy(&v, s.data(), 8);
        return v;
    };

    const std::int64_t cap = scalar_i64("replay/capacity");
    const int k = int(scalar_i64("replay/k"));
    const int h = int(scalar_i64("replay/h"));
    const int w = int(scalar_i64("replay/w"));
    const std::int64_t n = scalar_i64("replay/filled");
    const std::int64_t frame_rgb = std::int64_t(h) * w * 3;
    const std::int64_t frame_depth = std::int64_t(h) * w;

    auto meta_f32 = [&](const char* name, std::int64_t want) {
        const auto& s = small.at(need(name).h.name);
        if (s.size() != std::size_t(want) * 4)
            throw DataError("replay snapshot: bad size for " + std::string(name));
        std::vector<float> v;
        v.resize(std::size_t(want));
        std::memcpy(v.data(), s.data(), s.size());
        return v;
    };
    auto meta_u8 = [&](const char* name, std::int64_t want) {
        const auto& s = small.at(need(name).h.name);
        if (s.size() != std::size_t(want))
            throw DataError("replay snapshot: bad size for " + std::string(name));
        return s;
    };

    std::vector<float> action = meta_f32("replay/action", n * 3);
    std::vector<float> reward = meta_f32("replay/reward", n);
    std::vector<std::uint8_t> done = meta_u8("replay/done", n);
    std::vector<std::uint8_t> terminal = meta_u8("replay/terminal", n);
    std::vector<std::uint64_t> episode;
    std::vector<std::int64_t> stepv;
    episode.resize(std::size_t(n));
    stepv.resize(std::size_t(n));
    {
        const auto& se = small.at(need("replay/episode").h.name);
        const auto& ss = small.at(need("replay/step").h.name);
        if (se.size() != std::size_t(n) * 8 || ss.size() != std::size_t(n) * 8)
            throw DataError("replay snapshot: bad meta sizes");
        std::memcpy(episode.data(), se.data(), se.size());
        std::memcpy(stepv.data(), ss.data(), ss.size());
    }

    const Located& lrgb = need("replay/rgb");
    const Located& ldepth = need("replay/depth");
    if (lrgb.h.count != n * frame_rgb || ldepth.h.count != n * frame_depth)
        throw DataError("replay snapshot: frame array sizes disagree with the slot count");
    const bool rgb_small = small.count("replay/rgb") != 0;
    const bool depth_small = small.count("replay/depth") != 0;

    auto rb = std::make_unique<ReplayBuffer>(cap, k, h, w);
    std::vector<std::uint8_t> rgb_frame;
    std::vector<float> depth_frame;
    rgb_frame.resize(std::size_t(frame_rgb));
    depth_frame.resize(std::size_t(frame_depth));
    in.clear();
    for (std::int64_t i = 0; i < n; ++i) {
        if (rgb_small) {
            std::memcpy(rgb_frame.data(), small["replay/rgb"].data() + i * frame_rgb,
                        std::size_t(frame_rgb));
        } else {
            in.seekg(lrgb.offset + std::streamoff(i * frame_rgb));
            in.read(reinterpret_cast<char*>(rgb_frame.data()), std::streamsize(frame_rgb));
        }
        if (depth_small) {
            std::memcpy(depth_frame.data(), small["replay/depth"].data() + i * frame_depth * 4,
                        std::size_t(frame_depth) * 4);
        } else {
            in.seekg(ldepth.offset + std::streamoff(i * frame_depth * 4));
            in.read(reinterpret_cast<char*>(depth_frame.data()), std::streamsize(frame_depth) * 4);
        }
        if (!in) throw DataError("replay snapshot: truncated frame data");
        std::array<float, 3> a{action[std::size_t(i) * 3], action[std::size_t(i) * 3 + 1],
                               action[std::size_t(i) * 3 + 2]};
        rb->restore_slot(rgb_frame.data(), depth_frame.data(), a, reward[std::size_t(i)],
                         done[std::size_t(i)] != 0, terminal[std::size_t(i)] != 0,
                         episode[std::size_t(i)], stepv[std::size_t(i)]);
    }
    rb->restore_state(std::uint64_t(scalar_i64("replay/episode_counter")),
                      scalar_i64("replay/step_counter"), scalar_i64("replay/episode_open") != 0,
                      scalar_i64("replay/last_was_done") != 0);
    return rb;
}

}  // namespace deguv
