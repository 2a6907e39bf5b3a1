//! Union-find with parity, used to solve systems of constraints
//! `b_i * b_j = s_ij` over signs `b_i` in {+1, -1}.

pub(crate) struct ParityUnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
    // Parity of the edge to `parent`: true when the signs differ.
    flip: Vec<bool>,
}

impl ParityUnionFind {
    pub(crate) fn new(n: usize) -> Self {
        ParityUnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
            flip: vec![false; n],
        }
    }

    /// Root of `x` and the parity of `x` relative to it.
    pub(crate) fn find(&mut self, x: usize) -> (usize, bool) {
        let p = self.parent[x];
        if p == x {
            return (x, false);
        }
        let (root, parity) = self.find(p);
        self.parent[x] = root;
        self.flip[x] ^= parity;
        (root, self.flip[x])
    }

    /// Records `parity(a) xor parity(b) == differ`. Returns false on a
    /// contradiction with earlier constraints.
    pub(crate) fn unite(&mut self, a: usize, b: usize, differ: bool) -> bool {
        let (ra, pa) = self.find(a);
        let (rb, pb) = self.find(b);
        if ra == rb {
            return (pa ^ pb) == differ;
        }
        let (child, root) = if self.rank[ra] < self.rank[rb] { (ra, rb) } else { (rb, ra) };
        self.parent[child] = root;
        self.flip[child] = pa ^ pb ^ differ;
        if self.rank[ra] == self.rank[rb] {
            self.rank[root] += 1;
        }
        true
    }
}
