#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "deguv/agent.hpp"
#include "deguv/replay.hpp"

namespace deguv {

// Versioned binary container: a small header (magic, format version, config
// hash, step count) followed by named typed arrays with shapes. Everything
// little-endian. Layout:
//   "DGUVCKPT" | u32 version | u64 config_hash | i64 step | u32 n_entries
//   per entry: u32 name_len | name | u8 dtype | u32 ndim | i64 dims[] | payload
enum class Dtype : std::uint8_t { F32 = 0, I64 = 1, U64 = 2, U8 = 3 };

struct CheckpointEntry {
    std::string name;
    Dtype dtype = Dtype::F32;
    std::vector<std::int64_t> shape;
    std::vector<std::uint8_t> bytes;

    std::int64_t count() const;
    const float* f32() const;
    const std::int64_t* i64() const;
    const std::uint64_t* u64() const;
    const std::uint8_t* u8() const { return bytes.data(); }
};

class Checkpoint {
public:
    static constexpr std::uint32_t kVersion = 1;

    std::uint32_t version = kVersion;
    std::uint64_t config_hash = 0;
    std::int64_t step = 0;

    void put_f32(const std::string& name, const float* p, std::vector<std::int64_t> shape);
    void put_i64(const std::string& name, std::int64_t v);
    void put_u64(const std::string& name, std::uint64_t v);
    void put_u8(const std::string& name, const std::uint8_t* p, std::vector<std::int64_t> shape);
    void put_text(const std::string& name, const std::string& text);
    void put_i64_array(const std::string& name, const std::int64_t* p,
                       std::vector<std::int64_t> shape);
    void put_u64_array(const std::string& name, const std::uint64_t* p,
                       std::vector<std::int64_t> shape);

    bool has(const std::string& name) const;
    const CheckpointEntry& at(const std::string& name) const;  // DataError when missing
    std::int64_t get_i64(const std::string& name) const;
    std::uint64_t get_u64(const std::string& name) const;
    std::string get_text(const std::string& name) const;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);  // IoError / DataError

    const std::vector<CheckpointEntry>& entries() const { return entries_; }

private:
    CheckpointEntry& add(const std::string& name, Dtype dt, std::vector<std::int64_t> shape);

    std::vector<CheckpointEntry> entries_;
    std::map<std::string, std::size_t> index_;
};

// Agent persistence over the container: parameter values by qualified name,
// optimizer moments and step counts, the entropy coefficient, the update
// counter and the training cursor, plus the canonical config text.
Checkpoint make_agent_checkpoint(DeGuVAgent& agent, std::int64_t step, TrainCursor cursor);
void restore_agent(const Checkpoint& ck, DeGuVAgent& agent);  // DataError on shape/name mismatch
TrainCursor checkpoint_cursor(const Checkpoint& ck);

// Optional replay embedding for resumable interrupts.
void embed_replay(Checkpoint& ck, const ReplayBuffer& rb);
bool has_replay(const Checkpoint& ck);
std::unique_ptr<ReplayBuffer> restore_replay(const Checkpoint& ck);

// Sidecar snapshot in the same container format, streamed slot by slot so a
// multi-gigabyte buffer is never duplicated in memory.
void save_replay_snapshot(const ReplayBuffer& rb, const std::string& path,
                          std::uint64_t config_hash, std::int64_t step);
std::unique_ptr<ReplayBuffer> load_replay_snapshot(const std::string& path);

}  // namespace deguv
