//! Column-range workers and optional core pinning.

use std::sync::Once;

use crate::error::{Error, Result};

/// Number of logical CPUs addressable for pinning.
pub fn online_cores() -> usize {
    #[cfg(target_os = "linux")]
    {
        // SAFETY: sysconf has no preconditions.
        let n = unsafe { libc::sysconf(libc::_SC_NPROCESSORS_CONF) };
        if n > 0 {
            return n as usize;
        }
    }
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub(crate) fn validate_cores(cores: &[usize]) -> Result<()> {
    if cores.is_empty() {
        return Err(Error::Config("core list is empty".into()));
    }
    let limit = online_cores();
    let mut seen = vec![false; limit];
    for &c in cores {
        if c >= limit {
            return Err(Error::Config(format!("core {c} does not exist (machine has {limit})")));
        }
        if std::mem::replace(&mut seen[c], true) {
            return Err(Error::Config(format!("core {c} listed twice")));
        }
    }
    Ok(())
}

/// Pins the calling thread to `core`. Returns `false` where pinning is not
/// available; the caller keeps running unpinned.
pub(crate) fn pin_current_thread(core: usize) -> bool {
    #[cfg(target_os = "linux")]
    {
        // SAFETY: cpu_set_t is plain data; the CPU_* helpers stay in bounds
        // for core < CPU_SETSIZE, checked here.
        unsafe {
            if core >= libc::CPU_SETSIZE as usize {
                return false;
            }
            let mut set: libc::cpu_set_t = std::mem::zeroed();
            libc::CPU_SET(core, &mut set);
            libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) == 0
        }
    }
    #[cfg(not(target_os = "linux"))]
    {
        let _ = core;
        static WARN: Once = Once::new();
        WARN.call_once(|| log::warn!("core pinning is not supported on this platform; threads run unpinned"));
        false
    }
}

fn warn_pin_failed(core: usize) {
    static WARN: Once = Once::new();
    WARN.call_once(|| log::warn!("could not pin worker to core {core}; running unpinned"));
}

/// Splits `0..width` into `parts` contiguous ranges whose sizes differ by at
/// most one.
pub(crate) fn split(width: usize, parts: usize) -> Vec<(usize, usize)> {
    let parts = parts.clamp(1, width.max(1));
    let base = width / parts;
    let extra = width % parts;
    let mut out = Vec::with_capacity(parts);
    let mut lo = 0;
    for p in 0..parts {
        let hi = lo + base + usize::from(p < extra);
        out.push((lo, hi));
        lo = hi;
    }
    out
}

/// One worker's share of the slab.
pub(crate) struct Chunk<'a> {
    /// Window-local index of the first column in this chunk.
    pub first: usize,
    pub values: &'a mut [f64],
    pub scaling: &'a mut [f64],
    pub status: &'a mut [crate::tables::ColumnStatus],
}

/// Runs `work` over contiguous column chunks, one per worker. With a single
/// worker and no pinning the call stays on the current thread.
pub(crate) fn run_chunks<F>(
    stride: usize,
    values: &mut [f64],
    scaling: &mut [f64],
    status: &mut [crate::tables::ColumnStatus],
    threads: usize,
    cores: Option<&[usize]>,
    work: F,
) where
    F: Fn(Chunk<'_>) + Sync,
{
    let width = scaling.len();
    let workers = cores.map_or(threads, <[usize]>::len);
    let ranges = split(width, workers);
    if ranges.len() == 1 && cores.is_none() {
        work(Chunk {
            first: 0,
            values,
            scaling,
            status,
        });
        return;
    }

    let mut chunks = Vec::with_capacity(ranges.len());
    let (mut v, mut s, mut st) = (values, scaling, status);
    for &(lo, hi) in &ranges {
        let n = hi - lo;
        let (v0, v1) = std::mem::take(&mut v).split_at_mut(n * stride);
        let (s0, s1) = std::mem::take(&mut s).split_at_mut(n);
        let (t0, t1) = std::mem::take(&mut st).split_at_mut(n);
        chunks.push(Chunk {
            first: lo,
            values: v0,
            scaling: s0,
            status: t0,
        });
        v = v1;
        s = s1;
        st = t1;
    }

    let work = &work;
    std::thread::scope(|scope| {
        for (k, chunk) in chunks.into_iter().enumerate() {
            let core = cores.map(|c| c[k]);
            scope.spawn(move || {
                if let Some(core) = core {
                    if !pin_current_thread(core) {
                        warn_pin_failed(core);
                    }
                }
                work(chunk);
            });
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_balanced_and_covers() {
        for width in [1usize, 2, 7, 100] {
            for parts in [1usize, 2, 3, 8, 200] {
                let r = split(width, parts);
                assert_eq!(r.first().unwrap().0, 0);
                assert_eq!(r.last().unwrap().1, width);
                assert!(r.windows(2).all(|w| w[0].1 == w[1].0));
                let sizes: Vec<usize> = r.iter().map(|(a, b)| b - a).collect();
                assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
                assert!(sizes.iter().all(|&s| s > 0));
            }
        }
    }

    #[test]
    fn core_validation() {
        assert!(validate_cores(&[]).is_err());
        assert!(validate_cores(&[0, 0]).is_err());
        assert!(validate_cores(&[online_cores()]).is_err());
        assert!(validate_cores(&[0]).is_ok());
    }

    #[test]
    fn chunks_cover_every_column_once() {
        let stride = 4;
        let width = 11;
        let mut values = vec![0.0; stride * width];
        let mut scaling = vec![0.0; width];
        let mut status = vec![crate::tables::ColumnStatus::Ok; width];
        run_chunks(stride, &mut values, &mut scaling, &mut status, 3, None, |c| {
            for (k, s) in c.scaling.iter_mut().enumerate() {
                *s += (c.first + k) as f64;
            }
            assert_eq!(c.values.len(), c.scaling.len() * stride);
        });
        assert_eq!(scaling, (0..width).map(|c| c as f64).collect::<Vec<_>>());
    }
}
