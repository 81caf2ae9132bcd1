#include "superedge/postprocess.hpp"

#include <deque>
#include <vector>

namespace superedge {

EdgeMap bfs_expand(const EdgeMap& o_pix, const EdgeMap& o_obj, float pix_thr, float obj_thr) {
  require_same_geometry(o_pix, o_obj, "bfs_expand");
  const int h = o_pix.height(), w = o_pix.width();
  EdgeMap out(h, w);
  std::vector<char> seen(o_pix.size(), 0);
  std::deque<int> queue;
  const auto pix = o_pix.pixels();
  const auto obj = o_obj.pixels();
  for (int i = 0; i < h * w; ++i) {
    if (obj[i] >= obj_thr && pix[i] >= pix_thr) {
      seen[i] = 1;
      queue.push_back(i);
    }
  }
  // A seed that is not itself a candidate still expands into its neighbors.
  for (int i = 0; i < h * w; ++i) {
    if (obj[i] < obj_thr || seen[i]) continue;
    const int y = i / w, x = i % w;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int ny = y + dy, nx = x + dx;
        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
        const int j = ny * w + nx;
        if (!seen[j] && pix[j] >= pix_thr) {
          seen[j] = 1;
          queue.push_back(j);
        }
      }
    }
  }
  while (!queue.empty()) {
    const int i = queue.front();
    queue.pop_front();
    out.pixels()[i] = pix[i];
    const int y = i / w, x = i % w;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int ny = y + dy, nx = x + dx;
        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
        const int j = ny * w + nx;
        if (!seen[j] && pix[j] >= pix_thr) {
          seen[j] = 1;
          queue.push_back(j);
        }
      }
    }
  }
  return out;
}

EdgeMap fuse(const EdgeMap& o_pix, const EdgeMap& o_obj, FusionThresholds t) {
  const EdgeMap expanded = bfs_expand(o_pix, o_obj, t.pixel, t.object);
  Field mean(o_pix.height(), o_pix.width());
  for (std::size_t i = 0; i < mean.size(); ++i) mean.pixels()[i] = (expanded.pixels()[i] + o_obj.pixels()[i]) / 2.0F;
  return minmax_normalize(mean);
}

EdgeMap average_heads(const EdgeMap& o_pix, const EdgeMap& o_obj) {
  require_same_geometry(o_pix, o_obj, "average_heads");
  Field mean(o_pix.height(), o_pix.width());
  for (std::size_t i = 0; i < mean.size(); ++i) mean.pixels()[i] = (o_pix.pixels()[i] + o_obj.pixels()[i]) / 2.0F;
  return minmax_normalize(mean);
}

}  // namespace superedge
