use std::sync::atomic::{AtomicUsize, Ordering};

use portten::core::codegen::{gen_apply_kernel, gen_reduce_kernel, ApplyGeometry, ApplySpec, KernelSource, ReduceGeometry, ReduceOp};
use portten::{Compiled, KernelCache};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn seven_sources() -> Vec<KernelSource> {
    let mut sources: Vec<KernelSource> = ["x = x + 1", "x = x * 2", "x = max(x, 0)", "x = sqrt(abs(x))"]
        .iter()
        .map(|e| gen_apply_kernel(&ApplySpec::new(1, e).unwrap(), &ApplyGeometry::contiguous(&[64], 1)).unwrap())
        .collect();
    for op in [ReduceOp::Sum, ReduceOp::Max, ReduceOp::Min] {
        let g = ReduceGeometry { sizes: vec![64], strides: vec![1], dim: None };
        sources.push(gen_reduce_kernel(op, &g, 64).unwrap());
    }
    sources
}

#[test]
fn one_compile_per_distinct_key_over_a_long_script() {
    let sources = seven_sources();
    let cache = KernelCache::new();
    let builds = AtomicUsize::new(0);
    let mut rng = StdRng::seed_from_u64(7);
    let mut order: Vec<usize> = (0..7).collect();
    order.extend((7..100).map(|_| rng.gen_range(0..7)));
    for i in order {
        let handle = cache
            .get_or_build(&sources[i], "test", |_, _| {
                builds.fetch_add(1, Ordering::SeqCst);
                Ok(Compiled::new(i))
            })
            .unwrap();
        assert_eq!(handle, i);
    }
    let stats = cache.stats();
    assert_eq!(builds.load(Ordering::SeqCst), 7);
    assert_eq!((stats.compiles, stats.hits, stats.misses, stats.entries), (7, 93, 7, 7));
    assert!((stats.hit_rate() - 0.93).abs() < 1e-12);
}

#[test]
fn backend_name_is_part_of_the_key() {
    let source = &seven_sources()[0];
    let cache = KernelCache::new();
    cache.get_or_build(source, "a", |_, _| Ok(Compiled::new(1))).unwrap();
    cache.get_or_build(source, "b", |_, _| Ok(Compiled::new(2))).unwrap();
    assert_eq!(cache.stats().compiles, 2);
}

#[test]
fn binaries_persist_across_cache_instances() {
    let dir = tempfile::tempdir().unwrap();
    let sources = seven_sources();
    let first = KernelCache::with_dir(dir.path()).unwrap();
    for s in &sources {
        first
            .get_or_build(s, "dev", |src, stored| {
                assert!(stored.is_none());
                Ok(Compiled { handle: (), binary: Some(src.text.as_bytes().to_vec()) })
            })
            .unwrap();
    }
    let files = std::fs::read_dir(dir.path()).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "bin")).count();
    assert_eq!(files, 7);

    let second = KernelCache::with_dir(dir.path()).unwrap();
    for s in &sources {
        second
            .get_or_build(s, "dev", |src, stored| {
                assert_eq!(stored, Some(src.text.as_bytes()));
                Ok(Compiled::new(()))
            })
            .unwrap();
    }
    let stats = second.stats();
    assert_eq!((stats.compiles, stats.disk_loads), (0, 7));
}

#[test]
fn failed_builds_report_the_source_and_are_retried() {
    let source = &seven_sources()[1];
    let cache: KernelCache<u8> = KernelCache::new();
    let err = cache.get_or_build(source, "dev", |_, _| Err("error: expected ';' at 3:14".into())).unwrap_err();
    let shown = err.to_string();
    assert!(shown.contains("expected ';' at 3:14"));
    assert!(shown.contains(&source.text));
    assert_eq!(cache.get_or_build(source, "dev", |_, _| Ok(Compiled::new(5))).unwrap(), 5);
    assert_eq!(cache.stats().compiles, 2);
}
