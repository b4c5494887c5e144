//! Ordered parallel processing of line-delimited input files.
//!
//! A reader thread chunks lines into a bounded channel, worker threads map
//! chunks in parallel, and the caller's sink receives results reordered by
//! sequence number. Both channels are bounded, so a slow sink applies
//! back-pressure all the way to the reader and memory stays flat no matter
//! how large the input file is. Because the sink sees lines in exactly
//! input order, output is byte-identical for any worker count.

use std::collections::BTreeMap;
use std::io::{self, BufRead};
use std::path::Path;
use std::time::{Duration, Instant};

use crossbeam_channel::bounded;

/// Default lines per work unit: large enough to amortize channel traffic,
/// small enough to keep workers busy near chunk boundaries.
pub const DEFAULT_CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy)]
pub struct PipelineStats {
    pub lines: u64,
    pub elapsed: Duration,
}

impl PipelineStats {
    pub fn lines_per_second(&self) -> f64 {
        let secs = self.elapsed.as_secs_f64();
        if secs == 0.0 {
            0.0
        } else {
            self.lines as f64 / secs
        }
    }
}

enum Job {
    Chunk(u64, Vec<String>),
    Fail(io::Error),
}

enum Done<T> {
    Chunk(u64, Vec<T>),
    Fail(io::Error),
}

/// Map every line of `path` through `map` on `workers` threads, delivering
/// `(line_index, value)` pairs to `sink` in input order.
pub fn map_lines_ordered<T, M, S>(
    path: &Path,
    workers: usize,
    map: M,
    sink: S,
) -> io::Result<PipelineStats>
where
    T: Send,
    M: Fn(u64, &str) -> T + Sync,
    S: FnMut(u64, T),
{
    map_lines_ordered_chunked(path, workers, DEFAULT_CHUNK, map, sink)
}

pub fn map_lines_ordered_chunked<T, M, S>(
    path: &Path,
    workers: usize,
    chunk_size: usize,
    map: M,
    mut sink: S,
) -> io::Result<PipelineStats>
where
    T: Send,
    M: Fn(u64, &str) -> T + Sync,
    S: FnMut(u64, T),
{
    assert!(workers >= 1, "need at least one worker");
    assert!(chunk_size >= 1, "need a positive chunk size");
    let started = Instant::now();
    let file = std::fs::File::open(path)?;
    let reader = io::BufReader::with_capacity(1 << 20, file);

    let (job_tx, job_rx) = bounded::<Job>(workers * 2);
    let (done_tx, done_rx) = bounded::<Done<T>>(workers * 2);

    let mut lines_total = 0u64;
    let mut failure: Option<io::Error> = None;

    std::thread::scope(|scope| {
        scope.spawn(move || {
            let mut seq = 0u64;
            let mut chunk = Vec::with_capacity(chunk_size);
            for line in reader.lines() {
                match line {
                    Ok(l) => {
                        chunk.push(l);
                        if chunk.len() == chunk_size {
                            let full = std::mem::replace(
                                &mut chunk,
                                Vec::with_capacity(chunk_size),
                            );
                            if job_tx.send(Job::Chunk(seq, full)).is_err() {
                                return;
                            }
                            seq += 1;
                        }
                    }
                    Err(e) => {
                        let _ = job_tx.send(Job::Fail(e));
                        return;
                    }
                }
            }
            if !chunk.is_empty() {
                let _ = job_tx.send(Job::Chunk(seq, chunk));
            }
        });

        for _ in 0..workers {
            let job_rx = job_rx.clone();
            let done_tx = done_tx.clone();
            let map = &map;
            scope.spawn(move || {
                for job in job_rx.iter() {
                    let out = match job {
                        Job::Chunk(seq, lines) => {
                            let base = seq * chunk_size as u64;
                            let mapped: Vec<T> = lines
                                .iter()
                                .enumerate()
                                .map(|(i, line)| map(base + i as u64, line))
                                .collect();
                            Done::Chunk(seq, mapped)
                        }
                        Job::Fail(e) => Done::Fail(e),
                    };
                    if done_tx.send(out).is_err() {
                        return;
                    }
                }
            });
        }
        drop(job_rx);
        drop(done_tx);

        // Reorder: chunks complete out of order, the sink must not see that.
        let mut pending: BTreeMap<u64, Vec<T>> = BTreeMap::new();
        let mut next_seq = 0u64;
        for done in done_rx.iter() {
            match done {
                Done::Chunk(seq, items) => {
                    pending.insert(seq, items);
                    while let Some(items) = pending.remove(&next_seq) {
                        let base = next_seq * chunk_size as u64;
                        for (i, item) in items.into_iter().enumerate() {
                            sink(base + i as u64, item);
                            lines_total += 1;
                        }
                        next_seq += 1;
                    }
                }
                Done::Fail(e) => {
                    if failure.is_none() {
                        failure = Some(e);
                    }
                }
            }
        }
    });

    if let Some(e) = failure {
        return Err(e);
    }
    Ok(PipelineStats {
        lines: lines_total,
        elapsed: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_lines(n: usize) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for i in 0..n {
            writeln!(f, "line-{i}").unwrap();
        }
        f.flush().unwrap();
        f
    }

    #[test]
    fn delivers_lines_in_order_with_correct_indices() {
        let f = write_lines(1000);
        let mut seen = Vec::new();
        let stats = map_lines_ordered_chunked(
            f.path(),
            4,
            7, // tiny chunks force plenty of reordering
            |idx, line| (idx, line.to_string()),
            |idx, (mapped_idx, line)| {
                assert_eq!(idx, mapped_idx);
                seen.push((idx, line));
            },
        )
        .unwrap();
        assert_eq!(stats.lines, 1000);
        for (i, (idx, line)) in seen.iter().enumerate() {
            assert_eq!(*idx, i as u64);
            assert_eq!(line, &format!("line-{i}"));
        }
    }

    #[test]
    fn output_is_identical_across_worker_counts() {
        let f = write_lines(5000);
        let run = |workers: usize| {
            let mut out = String::new();
            map_lines_ordered_chunked(
                f.path(),
                workers,
                64,
                |idx, line| format!("{idx}:{}", line.len()),
                |_, s| {
                    out.push_str(&s);
                    out.push('\n');
                },
            )
            .unwrap();
            out
        };
        let one = run(1);
        assert_eq!(run(2), one);
        assert_eq!(run(8), one);
    }

    #[test]
    fn uneven_chunk_latency_does_not_break_ordering() {
        let f = write_lines(400);
        let mut indices = Vec::new();
        map_lines_ordered_chunked(
            f.path(),
            8,
            5,
            |idx, _| {
                if idx % 10 == 0 {
                    std::thread::sleep(std::time::Duration::from_micros(200));
                }
                idx
            },
            |_, idx| indices.push(idx),
        )
        .unwrap();
        assert_eq!(indices, (0..400).collect::<Vec<u64>>());
    }

    #[test]
    fn empty_file_and_missing_file() {
        let f = write_lines(0);
        let stats =
            map_lines_ordered(f.path(), 2, |_, _| (), |_, _| ()).unwrap();
        assert_eq!(stats.lines, 0);
        assert!(
            map_lines_ordered(Path::new("/no/such/file"), 2, |_, _| (), |_, _| ()).is_err()
        );
    }
}
