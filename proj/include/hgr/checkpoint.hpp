#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "hgr/error.hpp"
#include "hgr/model.hpp"

namespace hgr {

// Binary checkpoint layout, little-endian throughout:
//   bytes 0..3   magic "HGR1"
//   10 x u32     feature_dim, encoder_dim, lstm1_hidden, group_fc_dim,
//                lstm2_hidden, timesteps, num_actions, num_activities,
//                pool tag (0 max, 1 sum, 2 average), variant tag (enum order)
//   doubles      every active tensor in all_tensors() order
static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

namespace detail {

inline void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

inline std::uint32_t read_u32(std::ifstream& in, const std::string& what) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 4)) {
        throw ParseError("checkpoint truncated while reading " + what);
    }
    return v;
}

}  // namespace detail

inline void save_checkpoint(const Model& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("save_checkpoint: cannot open " + path + " for writing");
    out.write("HGR1", 4);
    const ModelConfig& c = m.config;
    for (std::uint32_t v :
         {static_cast<std::uint32_t>(c.feature_dim), static_cast<std::uint32_t>(c.encoder_dim),
          static_cast<std::uint32_t>(c.lstm1_hidden), static_cast<std::uint32_t>(c.group_fc_dim),
          static_cast<std::uint32_t>(c.lstm2_hidden), static_cast<std::uint32_t>(c.timesteps),
          static_cast<std::uint32_t>(c.num_actions), static_cast<std::uint32_t>(c.num_activities),
          static_cast<std::uint32_t>(c.pool), static_cast<std::uint32_t>(c.variant)}) {
        detail::write_u32(out, v);
    }
    for (const Tensor* t : all_tensors(const_cast<Model&>(m))) {
        out.write(reinterpret_cast<const char*>(t->data()),
                  static_cast<std::streamsize>(t->size() * sizeof(double)));
    }
    if (!out) throw InputError("save_checkpoint: write to " + path + " failed");
}

inline Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("load_checkpoint: cannot open " + path);
    char magic[4] = {};
    if (!in.read(magic, 4)) throw ParseError("checkpoint truncated while reading magic");
    if (std::memcmp(magic, "HGR1", 4) != 0) {
        if (std::memcmp(magic, "HGR", 3) == 0) {
            throw VersionError(std::string("unsupported checkpoint version tag '") +
                               std::string(magic, 4) + "', this reader supports HGR1");
        }
        throw ParseError(path + " is not an HGR checkpoint");
    }
    ModelConfig c;
    c.feature_dim = detail::read_u32(in, "feature_dim");
    c.encoder_dim = detail::read_u32(in, "encoder_dim");
    c.lstm1_hidden = detail::read_u32(in, "lstm1_hidden");
    c.group_fc_dim = detail::read_u32(in, "group_fc_dim");
    c.lstm2_hidden = detail::read_u32(in, "lstm2_hidden");
    c.timesteps = detail::read_u32(in, "timesteps");
    c.num_actions = detail::read_u32(in, "num_actions");
    c.num_activities = detail::read_u32(in, "num_activities");
    const std::uint32_t pool_tag = detail::read_u32(in, "pool tag");
    if (pool_tag > 2) throw ParseError("checkpoint has unknown pool tag " + std::to_string(pool_tag));
    c.pool = static_cast<PoolMode>(pool_tag);
    const std::uint32_t variant_tag = detail::read_u32(in, "variant tag");
    if (variant_tag > 7) {
        throw ParseError("checkpoint has unknown variant tag " + std::to_string(variant_tag));
    }
    c.variant = static_cast<Variant>(variant_tag);
    validate(c);

    // build a skeleton with the right tensor shapes, then overwrite values
    Model m = model_init(c, 0);
    for (Tensor* t : all_tensors(m)) {
        if (!in.read(reinterpret_cast<char*>(t->data()),
                     static_cast<std::streamsize>(t->size() * sizeof(double)))) {
            throw ParseError("checkpoint truncated inside parameter data");
        }
    }
    char extra = 0;
    if (in.read(&extra, 1)) throw ParseError("checkpoint has trailing bytes");
    return m;
}

}  // namespace hgr
