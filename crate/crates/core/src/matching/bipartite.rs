/// Maximum bipartite matching by augmenting paths (Kuhn), with an explicit
/// stack so long alternating paths cannot overflow the call stack.
///
/// Left vertices are tried in index order and their candidate lists are
/// scanned in the given order, which makes the result deterministic.
pub struct Bipartite<'a> {
    candidates: &'a [Vec<u32>],
    owner: Vec<u32>,
    assigned: Vec<u32>,
    visited: Vec<u32>,
    stamp: u32,
}

pub const NONE: u32 = u32::MAX;

impl<'a> Bipartite<'a> {
    pub fn new(candidates: &'a [Vec<u32>], right_len: usize) -> Self {
        Bipartite {
            candidates,
            owner: vec![NONE; right_len],
            assigned: vec![NONE; candidates.len()],
            visited: vec![0; right_len],
            stamp: 0,
        }
    }

    /// Run augmentation from every left vertex; returns the matching size.
    pub fn solve(&mut self) -> usize {
        (0..self.candidates.len()).filter(|&s| self.augment(s)).count()
    }

    /// Right vertex matched to each left vertex (`NONE` if unmatched).
    pub fn assignment(&self) -> &[u32] {
        &self.assigned
    }

    fn augment(&mut self, root: usize) -> bool {
        self.stamp += 1;
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        let mut via: Vec<u32> = Vec::new();
        while let Some(top) = stack.last_mut() {
            let (s, pos) = *top;
            if pos == self.candidates[s].len() {
                stack.pop();
                via.pop();
                continue;
            }
            top.1 += 1;
            let p = self.candidates[s][pos];
            if self.visited[p as usize] == self.stamp {
                continue;
            }
            self.visited[p as usize] = self.stamp;
            via.push(p);
            let o = self.owner[p as usize];
            if o == NONE {
                for (level, &(site, _)) in stack.iter().enumerate() {
                    let q = via[level];
                    self.assigned[site] = q;
                    self.owner[q as usize] = site as u32;
                }
                return true;
            }
            stack.push((o as usize, 0));
        }
        false
    }
}
