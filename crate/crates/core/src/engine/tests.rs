use super::*;
use crate::strategy::FamilyMode;
use alloc::vec;

fn scalar(width: usize, values: &[f64]) -> Arc<ImageBuffer> {
    Arc::new(ImageBuffer::new(width, values.len() / width, vec![values.to_vec()]).unwrap())
}

fn rgb(width: usize, height: usize, seed: u64) -> Arc<ImageBuffer> {
    // small LCG, enough for varied test data
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let planes = (0..3)
        .map(|_| {
            (0..width * height)
                .map(|_| {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((s >> 33) % 256) as f64
                })
                .collect()
        })
        .collect();
    Arc::new(ImageBuffer::new(width, height, planes).unwrap())
}

#[test]
fn init_examples() {
    let img = scalar(4, &[0.0, 0.0, 10.0, 10.0]);
    let s = SegmentationState::init(img, EngineConfig::default()).unwrap();
    assert_eq!(s.j(), 50.0);
    assert_eq!(s.iteration(), 0);
    assert_eq!(s.n_vr(), 1);

    let flat = Arc::new(ImageBuffer::new(2, 2, vec![vec![3.0; 4], vec![4.0; 4], vec![5.0; 4]]).unwrap());
    let mut s = SegmentationState::init(flat, EngineConfig::default()).unwrap();
    assert_eq!(s.j(), 0.0);
    assert!(s.cached_candidates(0).all(|c| !c.is_splittable()));
    assert_eq!(s.step(), Err(EngineError::Converged));

    let img = rgb(4, 3, 1);
    let s = SegmentationState::init(img.clone(), EngineConfig::default()).unwrap();
    let c = s.segmented();
    for (plane, data) in c.iter().zip(img.planes()) {
        let mean = data.iter().sum::<f64>() / 12.0;
        assert!(plane.iter().all(|&v| (v - mean).abs() < 1e-12));
    }
}

#[test]
fn two_pixel_image_converges_in_one_step() {
    let img = Arc::new(ImageBuffer::new(2, 1, vec![vec![10.0, 200.0], vec![0.0, 5.0], vec![7.0, 7.0]]).unwrap());
    let mut s = SegmentationState::init(img, EngineConfig::default()).unwrap();
    let e = s.step_vector().unwrap();
    assert_eq!(e.n_vr, 2);
    assert_eq!(s.j(), 0.0);
    assert_eq!(s.tau(), 100.0);
    assert_eq!(s.step(), Err(EngineError::Converged));
}

#[test]
fn step_decreases_j_by_event_delta() {
    let img = rgb(8, 8, 3);
    let mut s = SegmentationState::init(img, EngineConfig::default()).unwrap();
    for _ in 0..20 {
        let before = s.misfit_from_scratch();
        let e = s.step_vector().unwrap();
        let after = s.misfit_from_scratch();
        assert!(e.delta_j > 0.0);
        assert!(((before - after) - e.delta_j).abs() <= 1e-9 * e.delta_j.max(1.0));
        assert!((s.j() - after).abs() <= 1e-6 * after.max(1.0));
    }
}

#[test]
fn stop_criteria() {
    let img = rgb(8, 8, 4);
    let mut s = SegmentationState::init(img.clone(), EngineConfig::default()).unwrap();
    let out = s.run(&StopCriterion::regions(8)).unwrap();
    assert_eq!(out.status, StopStatus::TargetReached);
    assert_eq!(s.n_vr(), 8);
    assert_eq!(out.events.len(), 7);

    let mut s = SegmentationState::init(img.clone(), EngineConfig::default()).unwrap();
    s.run(&StopCriterion::tau(70.0)).unwrap();
    let taus: Vec<f64> = s.events().map(|e| e.tau).collect();
    assert!(*taus.last().unwrap() >= 70.0);
    assert!(taus[taus.len() - 2] < 70.0);

    let mut s = SegmentationState::init(img.clone(), EngineConfig::default()).unwrap();
    assert_eq!(s.run(&StopCriterion::default()), Err(EngineError::NoStopCriterion));
    let out = s.run(&StopCriterion::j_epsilon(0.0)).unwrap();
    assert_eq!(out.status, StopStatus::TargetReached);
    assert!(s.is_exact());
    assert_eq!(s.j(), 0.0);

    let mut s = SegmentationState::init(img, EngineConfig::default()).unwrap();
    let out = s.run(&StopCriterion::iterations(usize::MAX)).unwrap();
    assert_eq!(out.status, StopStatus::Converged);
    assert_eq!(s.j(), 0.0);
}

#[test]
fn family_strategy_stalls_on_checkerboard() {
    let img = scalar(2, &[0.0, 9.0, 9.0, 0.0]);
    let cfg = EngineConfig::vector(CuttingStrategy::BestInFamily(FamilyMode::Midpoints));
    let mut s = SegmentationState::init(img, cfg).unwrap();
    assert_eq!(s.step(), Err(EngineError::Stalled { j: 40.5 }));
    let out = s.run(&StopCriterion::iterations(5)).unwrap();
    assert_eq!(out.status, StopStatus::Stalled);
}

#[test]
fn undo_restores_previous_state() {
    let img = rgb(6, 5, 9);
    let mut cfg = EngineConfig::multiscalar(CuttingStrategy::OverallBest, MultiscalarStrategy::BestComponentForEach);
    cfg.snapshot_interval = 4;
    let mut s = SegmentationState::init(img, cfg).unwrap();
    assert_eq!(s.undo(), Err(EngineError::EmptyHistory));
    let mut states = vec![s.clone()];
    for _ in 0..10 {
        s.step().unwrap();
        states.push(s.clone());
    }
    for expected in states.iter().rev().skip(1) {
        s.undo().unwrap();
        assert_eq!(&s, expected);
    }
    assert_eq!(s.iteration(), 0);
}

#[test]
fn undo_across_strategy_switch() {
    let img = rgb(6, 6, 2);
    let mut s = SegmentationState::init(img, EngineConfig::default()).unwrap();
    s.step().unwrap();
    s.set_cutting_strategy(CuttingStrategy::BestInFamily(FamilyMode::AllPositions));
    let before = s.clone();
    s.step().unwrap();
    assert_eq!(s.history()[1].cutting, CuttingStrategy::BestInFamily(FamilyMode::AllPositions));
    s.undo().unwrap();
    assert_eq!(s, before);
}

#[test]
fn replay_reproduces_and_detects_divergence() {
    let img = rgb(8, 8, 5);
    let cfg = EngineConfig::multiscalar(CuttingStrategy::OverallBest, MultiscalarStrategy::CombineBestComponents);
    let mut s = SegmentationState::init(img.clone(), cfg).unwrap();
    s.run(&StopCriterion::iterations(6)).unwrap();
    let replayed = SegmentationState::replay(img.clone(), cfg, s.history()).unwrap();
    assert_eq!(replayed, s);

    let mut tampered = s.history().to_vec();
    tampered[3].events[0].delta_j += 1.0;
    assert_eq!(
        SegmentationState::replay(img, cfg, &tampered),
        Err(EngineError::Divergence { iteration: 4 })
    );
}

#[test]
fn scalar_image_multiscalar_matches_vector() {
    let img = scalar(8, &(0..64).map(|i| ((i * 37) % 101) as f64).collect::<Vec<_>>());
    let mut v = SegmentationState::init(img.clone(), EngineConfig::default()).unwrap();
    v.run(&StopCriterion::iterations(15)).unwrap();
    for ms in [
        MultiscalarStrategy::BestComponentOnly,
        MultiscalarStrategy::BestComponentForEach,
        MultiscalarStrategy::CombineBestComponents,
    ] {
        let mut m = SegmentationState::init(img.clone(), EngineConfig::multiscalar(CuttingStrategy::OverallBest, ms)).unwrap();
        m.run(&StopCriterion::iterations(15)).unwrap();
        assert_eq!(m.partition(0).labels(), v.partition(0).labels());
        let dv: Vec<f64> = v.events().map(|e| e.delta_j).collect();
        let dm: Vec<f64> = m.events().map(|e| e.delta_j).collect();
        assert_eq!(dv, dm);
    }
}

#[test]
fn tentative_split_matches_brute_force_decrease() {
    let img = rgb(7, 5, 11);
    let cfg = EngineConfig::multiscalar(CuttingStrategy::OverallBest, MultiscalarStrategy::BestComponentOnly);
    let mut s = SegmentationState::init(img.clone(), cfg).unwrap();
    for _ in 0..6 {
        for k in 0..3 {
            let t = s.tentative_split(k).unwrap();
            let mut p = s.partition(k).clone();
            let before = brute_channel_j(&img, &p, k);
            p.split(t.region, &t.cut, &img).unwrap();
            let after = brute_channel_j(&img, &p, k);
            assert!(((before - after) - t.delta_j).abs() <= 1e-9 * t.delta_j.max(1.0));
        }
        let best = (0..3).map(|k| s.tentative_split(k).unwrap().delta_j).fold(0.0, f64::max);
        let e = s.step_multiscalar().unwrap();
        assert_eq!(e.len(), 1);
        assert!((e[0].delta_j - best).abs() <= 1e-9 * best);
    }
}

fn brute_channel_j(img: &ImageBuffer, p: &Partition, k: usize) -> f64 {
    let c = p.paint(img);
    img.plane(k).iter().zip(&c[k]).map(|(d, c)| 0.5 * (d - c) * (d - c)).sum()
}

#[test]
fn constant_channel_has_no_tentative_split() {
    let img = Arc::new(
        ImageBuffer::new(3, 1, vec![vec![1.0, 2.0, 3.0], vec![4.0; 3], vec![9.0, 0.0, 9.0]]).unwrap(),
    );
    let s = SegmentationState::init(img, EngineConfig::multiscalar(CuttingStrategy::OverallBest, MultiscalarStrategy::BestComponentOnly)).unwrap();
    assert!(s.tentative_split(1).is_none());
    assert!(s.tentative_split(0).is_some());
}

#[test]
fn combine_requires_coinciding_partitions() {
    let img = rgb(6, 6, 8);
    let mut s = SegmentationState::init(
        img.clone(),
        EngineConfig::multiscalar(CuttingStrategy::OverallBest, MultiscalarStrategy::BestComponentForEach),
    )
    .unwrap();
    s.step().unwrap();
    assert_eq!(
        s.set_multiscalar_strategy(MultiscalarStrategy::CombineBestComponents),
        Err(EngineError::PartitionsDiverged)
    );

    let a = Partition::from_labels(&img, &(0..36).map(|i| (i % 2) as u32).collect::<Vec<_>>()).unwrap();
    let b = Partition::single_region(&img);
    let cfg = EngineConfig::multiscalar(CuttingStrategy::OverallBest, MultiscalarStrategy::CombineBestComponents);
    assert_eq!(
        SegmentationState::init_from(img.clone(), cfg, vec![a.clone(), b, a.clone()]).unwrap_err(),
        EngineError::PartitionsDiverged
    );
    let mut s = SegmentationState::init_from(img, cfg, vec![a.clone(), a.clone(), a]).unwrap();
    assert_eq!(s.n_vr(), 2);
    s.step().unwrap();
    assert!(s.channels_coincide());
}

#[test]
fn n_vr_tracks_superimposition() {
    let img = rgb(9, 7, 21);
    let cfg = EngineConfig::multiscalar(CuttingStrategy::OverallBest, MultiscalarStrategy::BestComponentForEach);
    let mut s = SegmentationState::init(img, cfg).unwrap();
    for _ in 0..12 {
        s.step().unwrap();
        assert_eq!(s.n_vr(), s.vector_partition().region_count());
        assert_eq!(s.n_sr(), (0..3).map(|k| s.partition(k).region_count()).sum::<usize>());
    }
}

#[test]
fn tau_values() {
    assert_eq!(tau_of(0.0, 5.0), 100.0);
    let t = tau_of(50.0, libm::sqrt(200.0));
    assert!((t - 100.0 * (1.0 - 10.0 / libm::sqrt(200.0))).abs() < 1e-12);
    assert!((t - 29.289321881).abs() < 1e-6);
    assert_eq!(tau_of(0.0, 0.0), 100.0);
    assert_eq!(tau_of(1.0, 0.0), 0.0);
}
