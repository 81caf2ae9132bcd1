#pragma once

#include "superedge/image.hpp"

namespace superedge {

struct FusionThresholds {
  float pixel = 0.005F;
  float object = 0.005F;
};

// Reachability from object-head seeds (o_obj >= obj_thr) through pixel-head
// candidates (o_pix >= pix_thr), 8-connected. Visited candidates keep their
// o_pix value; everything else is 0.
EdgeMap bfs_expand(const EdgeMap& o_pix, const EdgeMap& o_obj, float pix_thr, float obj_thr);

// minmax_normalize((bfs_expand(o_pix, o_obj) + o_obj) / 2)
EdgeMap fuse(const EdgeMap& o_pix, const EdgeMap& o_obj, FusionThresholds t = {});

// minmax_normalize((o_pix + o_obj) / 2), the fusion without skeleton expansion.
EdgeMap average_heads(const EdgeMap& o_pix, const EdgeMap& o_obj);

}  // namespace superedge
