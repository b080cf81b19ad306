//! Bounded-memory check for the streaming post reader: peak allocations
//! while scanning a 100k-record file stay under a fixed budget that does
//! not scale with file length.

use std::alloc::{GlobalAlloc, Layout, System};
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

use haze_core::ingest::{ParseMode, PostReader};

struct CountingAllocator;

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for CountingAllocator {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let ptr = System.alloc(layout);
        if !ptr.is_null() {
            let now = CURRENT.fetch_add(layout.size(), Ordering::Relaxed) + layout.size();
            PEAK.fetch_max(now, Ordering::Relaxed);
        }
        ptr
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        CURRENT.fetch_sub(layout.size(), Ordering::Relaxed);
    }
}

#[global_allocator]
static ALLOCATOR: CountingAllocator = CountingAllocator;

#[test]
fn post_reader_memory_is_bounded() {
    const RECORDS: usize = 100_000;
    const BUDGET_BYTES: usize = 8 * 1024 * 1024;

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("posts.csv");
    {
        let mut file = std::io::BufWriter::new(std::fs::File::create(&path).unwrap());
        writeln!(file, "id,user_id,timestamp,lat,lon,source,text").unwrap();
        for i in 0..RECORDS {
            writeln!(
                file,
                "p{i:08},u{:05},2014-03-{:02}T{:02}:{:02}:00+07:00,{},{},web,kabut asap nomor {i}",
                i % 500,
                1 + i % 28,
                8 + i % 12,
                i % 60,
                -5.0 + (i % 1000) as f64 * 0.01,
                96.0 + (i % 900) as f64 * 0.01,
            )
            .unwrap();
        }
    }

    // Measure only the streaming scan.
    PEAK.store(CURRENT.load(Ordering::Relaxed), Ordering::Relaxed);
    let before = PEAK.load(Ordering::Relaxed);

    let mut reader = PostReader::open(&path, ParseMode::Strict, None).unwrap();
    let mut count = 0u64;
    let mut text_bytes = 0u64;
    for post in &mut reader {
        let post = post.unwrap();
        count += 1;
        text_bytes += post.text.len() as u64;
    }
    assert_eq!(count, RECORDS as u64);
    assert_eq!(reader.report.accepted, RECORDS as u64);
    assert!(text_bytes > 0);

    let peak_delta = PEAK.load(Ordering::Relaxed) - before;
    assert!(
        peak_delta < BUDGET_BYTES,
        "streaming scan peaked at {peak_delta} bytes (budget {BUDGET_BYTES})"
    );
}
