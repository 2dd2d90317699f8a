use crate::geometry::Body;

/// Decision vector layout:
/// `[states (4 per node), controls (2 per node), free stage times, slacks]`.
///
/// Nodes are numbered stage by stage, `N_j + 1` per stage, so stage boundary
/// nodes appear twice. Slacks are ordered by stage, node, body (truck first)
/// and halfplane of the corridor assigned to that body.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub n: [usize; 3],
    node_offset: [usize; 3],
    num_nodes: usize,
    time_index: [Option<usize>; 3],
    halfplanes: [[usize; 2]; 3],
    slack_offset: [usize; 3],
    num_variables: usize,
}

fn body_slot(body: Body) -> usize {
    match body {
        Body::Truck => 0,
        Body::Trailer => 1,
    }
}

impl Layout {
    /// `halfplanes[j] = [truck count, trailer count]` for stage `j`.
    pub fn new(n: [usize; 3], free_time: [bool; 3], halfplanes: [[usize; 2]; 3]) -> Self {
        let mut node_offset = [0; 3];
        let mut acc = 0;
        for j in 0..3 {
            node_offset[j] = acc;
            acc += n[j] + 1;
        }
        let num_nodes = acc;
        let mut next = 6 * num_nodes;
        let mut time_index = [None; 3];
        for j in 0..3 {
            if free_time[j] {
                time_index[j] = Some(next);
                next += 1;
            }
        }
        let mut slack_offset = [0; 3];
        for j in 0..3 {
            slack_offset[j] = next;
            next += (n[j] + 1) * (halfplanes[j][0] + halfplanes[j][1]);
        }
        Self {
            n,
            node_offset,
            num_nodes,
            time_index,
            halfplanes,
            slack_offset,
            num_variables: next,
        }
    }

    pub fn num_variables(&self) -> usize {
        self.num_variables
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn state(&self, stage: usize, k: usize) -> usize {
        4 * (self.node_offset[stage] + k)
    }

    pub fn control(&self, stage: usize, k: usize) -> usize {
        4 * self.num_nodes + 2 * (self.node_offset[stage] + k)
    }

    pub fn time(&self, stage: usize) -> Option<usize> {
        self.time_index[stage]
    }

    pub fn num_halfplanes(&self, stage: usize, body: Body) -> usize {
        self.halfplanes[stage][body_slot(body)]
    }

    pub fn slack(&self, stage: usize, k: usize, body: Body, h: usize) -> usize {
        let per_node = self.halfplanes[stage][0] + self.halfplanes[stage][1];
        let body_off = match body {
            Body::Truck => 0,
            Body::Trailer => self.halfplanes[stage][0],
        };
        self.slack_offset[stage] + k * per_node + body_off + h
    }

    pub fn num_slacks(&self) -> usize {
        self.num_variables - self.slack_offset[0]
    }

    pub fn num_free_times(&self) -> usize {
        self.time_index.iter().filter(|t| t.is_some()).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_by_hand() {
        let l = Layout::new([4, 4, 4], [true; 3], [[4, 4]; 3]);
        // 3·(5·4) + 3·(5·2) + 3 + 3·5·2·4
        assert_eq!(l.num_variables(), 60 + 30 + 3 + 120);
        assert_eq!(l.num_slacks(), 120);
        let frozen = Layout::new([4, 4, 4], [true, false, true], [[4, 4]; 3]);
        assert_eq!(frozen.num_variables(), 212);
        assert_eq!(frozen.num_free_times(), 2);
    }

    #[test]
    fn indices_are_a_bijection() {
        let l = Layout::new([2, 3, 1], [true, false, true], [[4, 5], [3, 4], [4, 4]]);
        let mut seen = vec![0u8; l.num_variables()];
        for j in 0..3 {
            for k in 0..=l.n[j] {
                for i in 0..4 {
                    seen[l.state(j, k) + i] += 1;
                }
                for i in 0..2 {
                    seen[l.control(j, k) + i] += 1;
                }
                for body in Body::BOTH {
                    for h in 0..l.num_halfplanes(j, body) {
                        seen[l.slack(j, k, body, h)] += 1;
                    }
                }
            }
            if let Some(t) = l.time(j) {
                seen[t] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }
}
