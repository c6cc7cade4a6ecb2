//! Maximization of functions of a node index.

/// Integer golden-section search for a maximum of `f` on `lo..=hi`, assuming
/// unimodality there. Ties go to the smaller index.
pub fn golden_section_max(lo: usize, hi: usize, f: &mut dyn FnMut(usize) -> f64) -> (usize, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let probe = |a: usize, b: usize, frac: f64| a + libm::round((b - a) as f64 * frac) as usize;
    while b - a > 3 {
        let x1 = probe(a, b, 1.0 - INV_PHI);
        let x2 = probe(a, b, INV_PHI).max(x1 + 1);
        if f(x1) >= f(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let mut best = (a, f(a));
    for i in a + 1..=b {
        let v = f(i);
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Scans `lo..=hi` at the given stride, then refines the bracket around the
/// best sample by golden-section search. Guards against local maxima that
/// are wider than the stride.
pub fn bracketed_max(lo: usize, hi: usize, stride: usize, f: &mut dyn FnMut(usize) -> f64) -> (usize, f64) {
    assert!(lo <= hi, "empty search range");
    let stride = stride.max(1);
    let mut samples = alloc::vec::Vec::new();
    let mut i = lo;
    loop {
        samples.push((i, f(i)));
        if i == hi {
            break;
        }
        i = (i + stride).min(hi);
    }
    let mut k = 0;
    for (j, s) in samples.iter().enumerate() {
        if s.1 > samples[k].1 {
            k = j;
        }
    }
    let a = samples[k.saturating_sub(1)].0;
    let b = samples[(k + 1).min(samples.len() - 1)].0;
    let refined = golden_section_max(a, b, f);
    if refined.1 > samples[k].1 || (refined.1 == samples[k].1 && refined.0 < samples[k].0) {
        refined
    } else {
        samples[k]
    }
}

/// Hill climb from `start` with doubling steps until the value drops, then
/// golden-section search on the last bracket. Meant for a warm start close
/// to the peak of a unimodal function.
pub fn climb_max(lo: usize, hi: usize, start: usize, f: &mut dyn FnMut(usize) -> f64) -> (usize, f64) {
    assert!(lo <= hi, "empty search range");
    let start = start.clamp(lo, hi);
    let here = f(start);
    let up = if start < hi { f(start + 1) } else { f64::NEG_INFINITY };
    let down = if start > lo { f(start - 1) } else { f64::NEG_INFINITY };
    if here >= up && here >= down {
        return if down == here { (start - 1, down) } else { (start, here) };
    }
    let rising = up > down;
    let mut prev = start;
    let mut cur = if rising { start + 1 } else { start - 1 };
    let mut best = if rising { up } else { down };
    let mut step = 2;
    loop {
        let next = if rising { (cur + step).min(hi) } else { cur.saturating_sub(step).max(lo) };
        if next == cur {
            break;
        }
        let v = f(next);
        if v <= best {
            let (a, b) = if rising { (prev, next) } else { (next, prev) };
            return golden_section_max(a, b, f);
        }
        prev = cur;
        cur = next;
        best = v;
        step *= 2;
    }
    let (a, b) = if rising { (prev, cur) } else { (cur, prev) };
    golden_section_max(a, b, f)
}
