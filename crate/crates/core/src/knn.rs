//! Uniform-grid k-nearest-neighbour search over points in `[0,1]²`.

use alloc::vec;
use alloc::vec::Vec;

use crate::pattern::Point;

#[derive(Debug, Clone)]
pub struct NeighborGrid {
    side: usize,
    cell_start: Vec<u32>,
    items: Vec<u32>,
}

impl NeighborGrid {
    pub fn new(points: &[Point]) -> Self {
        let side = (libm::sqrt(points.len() as f64 / 2.0) as usize).clamp(1, 1024);
        let cell_of = |p: &Point| {
            let cx = crate::field::pixel_index(p.x, side);
            let cy = crate::field::pixel_index(p.y, side);
            cy * side + cx
        };
        let mut counts = vec![0u32; side * side + 1];
        for p in points {
            counts[cell_of(p) + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; points.len()];
        for (i, p) in points.iter().enumerate() {
            let c = cell_of(p);
            items[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        Self { side, cell_start: counts, items }
    }

    fn cell(&self, cx: usize, cy: usize) -> &[u32] {
        let c = cy * self.side + cx;
        &self.items[self.cell_start[c] as usize..self.cell_start[c + 1] as usize]
    }

    /// Indices of the `k` points nearest to `query`, ordered by distance then
    /// index. `exclude` skips one index.
    pub fn k_nearest(&self, points: &[Point], query: Point, k: usize, exclude: Option<usize>) -> Vec<usize> {
        self.k_nearest_filtered(points, query, k, |i| Some(i) != exclude)
    }

    pub fn k_nearest_filtered(
        &self,
        points: &[Point],
        query: Point,
        k: usize,
        keep: impl Fn(usize) -> bool,
    ) -> Vec<usize> {
        let side = self.side as isize;
        let h = 1.0 / self.side as f64;
        let qx = crate::field::pixel_index(query.x, self.side) as isize;
        let qy = crate::field::pixel_index(query.y, self.side) as isize;
        let mut found: Vec<(f64, usize)> = Vec::new();
        let max_ring = side;
        for ring in 0..=max_ring {
            let mut visit = |cx: isize, cy: isize| {
                if cx < 0 || cy < 0 || cx >= side || cy >= side {
                    return;
                }
                for &i in self.cell(cx as usize, cy as usize) {
                    let i = i as usize;
                    if keep(i) {
                        found.push((points[i].distance_squared(query), i));
                    }
                }
            };
            if ring == 0 {
                visit(qx, qy);
            } else {
                for dx in -ring..=ring {
                    visit(qx + dx, qy - ring);
                    visit(qx + dx, qy + ring);
                }
                for dy in (-ring + 1)..ring {
                    visit(qx - ring, qy + dy);
                    visit(qx + ring, qy + dy);
                }
            }
            // everything not yet visited is at least `ring * h` away
            if found.len() >= k {
                sort_candidates(&mut found);
                let kth = found[k - 1].0;
                let reach = ring as f64 * h;
                if kth <= reach * reach {
                    break;
                }
            }
        }
        sort_candidates(&mut found);
        found.truncate(k);
        found.into_iter().map(|(_, i)| i).collect()
    }
}

fn sort_candidates(found: &mut [(f64, usize)]) {
    found.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
}
