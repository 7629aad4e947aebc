//! Sparse LU factorisation of simplex bases with product-form updates.
//!
//! The factorisation is a right-looking Markowitz elimination with threshold
//! pivoting. Column and row singletons are taken first, which for the
//! staircase-shaped bases produced by scheduling models covers most of the
//! matrix without fill.

/// Column of the basis matrix in sparse (row, value) form.
pub(crate) struct SparseColumn<'a> {
    pub rows: &'a [usize],
    pub vals: &'a [f64],
}

const MARKOWITZ_THRESHOLD: f64 = 0.1;
const ROW_SINGLETON_THRESHOLD: f64 = 0.01;
const MARKOWITZ_SEARCH_COLUMNS: usize = 4;
const ZERO_PIVOT: f64 = 1e-11;
const DROP_TOL: f64 = 1e-14;

#[derive(Debug)]
pub(crate) struct Singular {
    /// Basis positions whose columns are linearly dependent on the others.
    pub dependent_positions: Vec<usize>,
    /// Rows left without a pivot; as many as dependent positions.
    pub free_rows: Vec<usize>,
}

struct Eta {
    pos: usize,
    pivot: f64,
    idx: Vec<usize>,
    val: Vec<f64>,
}

pub(crate) struct LuFactors {
    m: usize,
    piv_row: Vec<usize>,
    piv_pos: Vec<usize>,
    diag: Vec<f64>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    etas: Vec<Eta>,
    eta_nnz: usize,
}

impl LuFactors {
    pub fn num_updates(&self) -> usize {
        self.etas.len()
    }

    pub fn eta_nnz(&self) -> usize {
        self.eta_nnz
    }

    pub fn factor_nnz(&self) -> usize {
        self.l_idx.len() + self.u_idx.len() + self.m
    }

    /// Solves `B x = b`. On entry `rhs` is indexed by row, on exit by basis
    /// position.
    pub fn ftran(&self, rhs: &mut [f64], work: &mut [f64]) {
        debug_assert_eq!(rhs.len(), self.m);
        for k in 0..self.m {
            let br = rhs[self.piv_row[k]];
            if br != 0.0 {
                for p in self.l_start[k]..self.l_start[k + 1] {
                    rhs[self.l_idx[p]] -= self.l_val[p] * br;
                }
            }
        }
        for k in (0..self.m).rev() {
            let mut s = rhs[self.piv_row[k]];
            for p in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[p] * work[self.u_idx[p]];
            }
            work[self.piv_pos[k]] = s / self.diag[k];
        }
        rhs.copy_from_slice(work);
        for eta in &self.etas {
            let xp = rhs[eta.pos];
            if xp != 0.0 {
                let xp = xp / eta.pivot;
                rhs[eta.pos] = xp;
                for (&i, &a) in eta.idx.iter().zip(&eta.val) {
                    rhs[i] -= a * xp;
                }
            }
        }
    }

    /// Solves `B' y = c`. On entry `rhs` is indexed by basis position, on exit
    /// by row.
    pub fn btran(&self, rhs: &mut [f64], work: &mut [f64]) {
        debug_assert_eq!(rhs.len(), self.m);
        for eta in self.etas.iter().rev() {
            let mut s = rhs[eta.pos];
            for (&i, &a) in eta.idx.iter().zip(&eta.val) {
                s -= a * rhs[i];
            }
            rhs[eta.pos] = s / eta.pivot;
        }
        for k in 0..self.m {
            let z = rhs[self.piv_pos[k]] / self.diag[k];
            work[self.piv_row[k]] = z;
            if z != 0.0 {
                for p in self.u_start[k]..self.u_start[k + 1] {
                    rhs[self.u_idx[p]] -= self.u_val[p] * z;
                }
            }
        }
        for k in (0..self.m).rev() {
            let mut s = 0.0;
            for p in self.l_start[k]..self.l_start[k + 1] {
                s += self.l_val[p] * work[self.l_idx[p]];
            }
            if s != 0.0 {
                work[self.piv_row[k]] -= s;
            }
        }
        rhs.copy_from_slice(work);
    }

    /// Records the replacement of the column at basis position `pos` by a
    /// column whose FTRAN image is `alpha` (indexed by basis position).
    pub fn push_update(&mut self, pos: usize, alpha: &[f64]) {
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (i, &a) in alpha.iter().enumerate() {
            if i != pos && a.abs() > DROP_TOL {
                idx.push(i);
                val.push(a);
            }
        }
        self.eta_nnz += idx.len() + 1;
        self.etas.push(Eta { pos, pivot: alpha[pos], idx, val });
    }
}

/// Factorises the `m x m` matrix whose columns are `cols` (one per basis
/// position).
pub(crate) fn factorize(m: usize, cols: &[SparseColumn<'_>]) -> Result<LuFactors, Singular> {
    assert_eq!(cols.len(), m);
    let mut col_rows: Vec<Vec<usize>> = Vec::with_capacity(m);
    let mut col_vals: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut row_cols: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (j, c) in cols.iter().enumerate() {
        let mut r = Vec::with_capacity(c.rows.len());
        let mut v = Vec::with_capacity(c.rows.len());
        for (&i, &a) in c.rows.iter().zip(c.vals) {
            if a != 0.0 {
                r.push(i);
                v.push(a);
                row_cols[i].push(j);
            }
        }
        col_rows.push(r);
        col_vals.push(v);
    }

    let mut col_active = vec![true; m];
    let mut row_active = vec![true; m];
    let mut col_singletons: Vec<usize> = Vec::new();
    let mut row_singletons: Vec<usize> = Vec::new();
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); m + 2];
    for j in 0..m {
        let n = col_rows[j].len();
        if n == 1 {
            col_singletons.push(j);
        }
        buckets[n.min(m + 1)].push(j);
    }
    for (i, rc) in row_cols.iter().enumerate() {
        if rc.len() == 1 {
            row_singletons.push(i);
        }
    }

    let mut lu = LuFactors {
        m,
        piv_row: Vec::with_capacity(m),
        piv_pos: Vec::with_capacity(m),
        diag: Vec::with_capacity(m),
        l_start: vec![0],
        l_idx: Vec::new(),
        l_val: Vec::new(),
        u_start: vec![0],
        u_idx: Vec::new(),
        u_val: Vec::new(),
        etas: Vec::new(),
        eta_nnz: 0,
    };
    let mut dependent = Vec::new();
    let mut urow: Vec<(usize, f64)> = Vec::new();
    let mut lcol: Vec<(usize, f64)> = Vec::new();
    let mut min_bucket = 2usize;
    let mut remaining = m;

    let mut stamp = vec![0usize; m];
    let mut stamp_gen = 0usize;

    while remaining > 0 {
        // Pivot choice: column singleton, then row singleton, then Markowitz.
        let mut choice: Option<(usize, usize)> = None;
        let mut retired = false;
        while let Some(j) = col_singletons.pop() {
            if !col_active[j] || col_rows[j].len() != 1 {
                continue;
            }
            if col_vals[j][0].abs() > ZERO_PIVOT {
                choice = Some((col_rows[j][0], j));
            } else {
                let i = col_rows[j][0];
                retire_dependent(j, &mut col_rows, &mut col_vals, &mut row_cols, &mut col_active);
                note_row_count(i, &row_cols, &mut row_singletons);
                dependent.push(j);
                remaining -= 1;
                retired = true;
            }
            break;
        }
        if retired {
            continue;
        }
        if choice.is_none() {
            while let Some(i) = row_singletons.pop() {
                if !row_active[i] || row_cols[i].len() != 1 {
                    continue;
                }
                let j = row_cols[i][0];
                let (amax, aij) = col_max_and_entry(&col_rows[j], &col_vals[j], i);
                if aij.abs() > ZERO_PIVOT && aij.abs() >= ROW_SINGLETON_THRESHOLD * amax {
                    choice = Some((i, j));
                    break;
                }
            }
        }
        if choice.is_none() {
            // Empty columns are structurally dependent.
            let mut progressed = false;
            for j in std::mem::take(&mut buckets[0]) {
                if col_active[j] && col_rows[j].is_empty() {
                    col_active[j] = false;
                    dependent.push(j);
                    remaining -= 1;
                    progressed = true;
                }
            }
            if progressed {
                continue;
            }
            stamp_gen += 1;
            choice = markowitz_search(
                &mut buckets,
                &mut min_bucket,
                &col_rows,
                &col_vals,
                &row_cols,
                &col_active,
                &mut stamp,
                stamp_gen,
            );
            if choice.is_none() {
                // Everything left is numerically zero.
                for j in 0..m {
                    if col_active[j] {
                        col_active[j] = false;
                        dependent.push(j);
                    }
                }
                break;
            }
        }
        let Some((r, c)) = choice else { continue };

        // Pivot row r, column c.
        urow.clear();
        let mut diag = 0.0;
        let row_entries = std::mem::take(&mut row_cols[r]);
        for &j in &row_entries {
            let p = col_rows[j].iter().position(|&i| i == r).expect("pattern out of sync");
            let v = col_vals[j][p];
            col_rows[j].swap_remove(p);
            col_vals[j].swap_remove(p);
            if j == c {
                diag = v;
            } else {
                urow.push((j, v));
            }
        }
        lcol.clear();
        for (&i, &v) in col_rows[c].iter().zip(&col_vals[c]) {
            lcol.push((i, v / diag));
            let q = row_cols[i].iter().position(|&jj| jj == c).expect("pattern out of sync");
            row_cols[i].swap_remove(q);
        }
        col_rows[c].clear();
        col_vals[c].clear();
        col_active[c] = false;
        row_active[r] = false;
        remaining -= 1;

        for &(i, l) in &lcol {
            for &(j, u) in &urow {
                let delta = -l * u;
                if let Some(p) = col_rows[j].iter().position(|&ii| ii == i) {
                    col_vals[j][p] += delta;
                } else {
                    col_rows[j].push(i);
                    col_vals[j].push(delta);
                    row_cols[i].push(j);
                }
            }
        }
        for &(i, _) in &lcol {
            note_row_count(i, &row_cols, &mut row_singletons);
        }
        for &(j, _) in &urow {
            let n = col_rows[j].len();
            if n == 1 {
                col_singletons.push(j);
            }
            let b = n.min(m + 1);
            buckets[b].push(j);
            if b < min_bucket {
                min_bucket = b.max(2);
            }
        }

        lu.piv_row.push(r);
        lu.piv_pos.push(c);
        lu.diag.push(diag);
        for &(i, l) in &lcol {
            if l.abs() > DROP_TOL {
                lu.l_idx.push(i);
                lu.l_val.push(l);
            }
        }
        lu.l_start.push(lu.l_idx.len());
        for &(j, u) in &urow {
            if u.abs() > DROP_TOL {
                lu.u_idx.push(j);
                lu.u_val.push(u);
            }
        }
        lu.u_start.push(lu.u_idx.len());
    }

    if !dependent.is_empty() {
        let free_rows = (0..m).filter(|&i| row_active[i]).collect();
        dependent.sort_unstable();
        return Err(Singular { dependent_positions: dependent, free_rows });
    }
    Ok(lu)
}

fn note_row_count(i: usize, row_cols: &[Vec<usize>], row_singletons: &mut Vec<usize>) {
    if row_cols[i].len() == 1 {
        row_singletons.push(i);
    }
}

fn retire_dependent(
    j: usize,
    col_rows: &mut [Vec<usize>],
    col_vals: &mut [Vec<f64>],
    row_cols: &mut [Vec<usize>],
    col_active: &mut [bool],
) {
    for &i in &col_rows[j] {
        if let Some(q) = row_cols[i].iter().position(|&jj| jj == j) {
            row_cols[i].swap_remove(q);
        }
    }
    col_rows[j].clear();
    col_vals[j].clear();
    col_active[j] = false;
}

fn col_max_and_entry(rows: &[usize], vals: &[f64], i: usize) -> (f64, f64) {
    let mut amax = 0.0f64;
    let mut aij = 0.0;
    for (&r, &v) in rows.iter().zip(vals) {
        amax = amax.max(v.abs());
        if r == i {
            aij = v;
        }
    }
    (amax, aij)
}

fn markowitz_search(
    buckets: &mut [Vec<usize>],
    min_bucket: &mut usize,
    col_rows: &[Vec<usize>],
    col_vals: &[Vec<f64>],
    row_cols: &[Vec<usize>],
    col_active: &[bool],
    stamp: &mut [usize],
    stamp_gen: usize,
) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize, usize, f64)> = None; // (cost, row, col, |a|)
    let mut examined = 0;
    let nb = buckets.len();
    let mut k = (*min_bucket).max(1);
    let mut first_nonempty = None;
    while k < nb {
        let bucket = &mut buckets[k];
        // compact stale entries
        let mut w = 0;
        for r in 0..bucket.len() {
            let j = bucket[r];
            if col_active[j] && col_rows[j].len().min(nb - 1) == k && stamp[j] != stamp_gen {
                stamp[j] = stamp_gen;
                bucket[w] = j;
                w += 1;
            }
        }
        bucket.truncate(w);
        if !bucket.is_empty() && first_nonempty.is_none() {
            first_nonempty = Some(k);
        }
        for &j in bucket.iter() {
            let amax = col_vals[j].iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if amax <= ZERO_PIVOT {
                continue;
            }
            for (&i, &v) in col_rows[j].iter().zip(&col_vals[j]) {
                if v.abs() < MARKOWITZ_THRESHOLD * amax {
                    continue;
                }
                let cost = (row_cols[i].len() - 1) * (k - 1);
                let better = match best {
                    None => true,
                    Some((bc, _, _, ba)) => cost < bc || (cost == bc && v.abs() > ba),
                };
                if better {
                    best = Some((cost, i, j, v.abs()));
                }
            }
            examined += 1;
            if examined >= MARKOWITZ_SEARCH_COLUMNS {
                break;
            }
        }
        if examined >= MARKOWITZ_SEARCH_COLUMNS {
            break;
        }
        if let Some((cost, ..)) = best {
            if cost <= (k - 1) * (k - 1) {
                break;
            }
        }
        k += 1;
    }
    if let Some(f) = first_nonempty {
        *min_bucket = f.max(2);
    }
    best.map(|(_, i, j, _)| (i, j))
}
