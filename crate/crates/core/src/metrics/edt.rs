//! Exact squared Euclidean distance transform (Felzenszwalb-Huttenlocher).
//!
//! Squared distances are integers and stay exact in `f64`.

/// Lower envelope of parabolas over one line. `f[i]` is `INFINITY` where no
/// seed exists; the output is `min_j f[j] + (i - j)²`.
fn envelope_1d(f: &[f64], out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    let n = f.len();
    v.clear();
    z.clear();
    for q in 0..n {
        if f[q].is_infinite() {
            continue;
        }
        while let Some(&p) = v.last() {
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= *z.last().expect("z tracks v") {
                v.pop();
                z.pop();
            } else {
                v.push(q);
                z.push(s);
                break;
            }
        }
        if v.is_empty() {
            v.push(q);
            z.push(f64::NEG_INFINITY);
        }
    }
    if v.is_empty() {
        out.fill(f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while k + 1 < v.len() && z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Squared distance from every pixel to the nearest `true` pixel of `seeds`
/// (`INFINITY` everywhere when there are none).
pub fn squared_edt(seeds: &[bool], rows: usize, cols: usize) -> Vec<f64> {
    let mut grid: Vec<f64> = seeds
        .iter()
        .map(|&s| if s { 0.0 } else { f64::INFINITY })
        .collect();
    let (mut v, mut z) = (Vec::new(), Vec::new());

    let mut line = vec![0.0; rows];
    let mut out = vec![0.0; rows];
    for c in 0..cols {
        for r in 0..rows {
            line[r] = grid[r * cols + c];
        }
        envelope_1d(&line, &mut out, &mut v, &mut z);
        for r in 0..rows {
            grid[r * cols + c] = out[r];
        }
    }
    let mut out = vec![0.0; cols];
    for r in 0..rows {
        let row = &mut grid[r * cols..(r + 1) * cols];
        envelope_1d(row, &mut out, &mut v, &mut z);
        row.copy_from_slice(&out);
    }
    grid
}
