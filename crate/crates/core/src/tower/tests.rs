use super::*;
use crate::model::{build_model, AmbientPoint, CycleSpec};
use crate::quotient::CycleCentralData;

fn default_system() -> CycleSystem {
    build_model(CycleSpec::from_central(CycleCentralData::default())).unwrap()
}

fn default_tower(levels: usize) -> Tower {
    Tower::build(default_system(), TowerConfig { levels, ..TowerConfig::default() }).unwrap()
}

/// Re-checks every trajectory of length `pi_parent` point by point.
fn brute_force_blocks(sys: &CycleSystem, child: &PeriodicOrbit, parent: &PeriodicOrbit, gamma: f64) -> (Vec<u64>, f64) {
    let span = shadow_span(sys, child, parent).unwrap();
    let pp = parent.period as usize;
    let ys: Vec<AmbientPoint> = child.points(sys, 0, child.period).collect();
    let xs: Vec<AmbientPoint> = parent.points(sys, 0, parent.period).collect();
    let mut kept = Vec::new();
    let mut measured = 0.0_f64;
    for b in 0..span.reps as usize {
        let mut worst = 0.0_f64;
        for i in 0..pp {
            for t in 0..pp {
                let k = span.start as usize + b * pp + i + t;
                let y = &ys[k % ys.len()];
                worst = worst.max(sys.distance(y, &xs[(i + t) % pp]));
            }
        }
        if worst < gamma {
            kept.push(b as u64);
            measured = measured.max(worst);
        }
    }
    (kept, measured)
}

#[test]
fn certificates_agree_with_brute_force() {
    let tower = default_tower(3);
    let sys = tower.system();
    for n in 0..tower.top() {
        let link = tower.level(n).link.as_ref().unwrap();
        let parent = &tower.level(n).orbit;
        let child = &tower.level(n + 1).orbit;
        let (kept, measured) = brute_force_blocks(sys, child, parent, link.gamma);
        assert_eq!(link.certificate.blocks, kept, "level {n}");
        assert_eq!(link.certificate.gamma_measured, measured, "level {n}");
        assert_eq!(
            link.certificate.fiber_count * parent.period,
            (link.kappa * child.period as f64).round() as u64
        );
    }
}

#[test]
fn zero_gamma_gives_an_empty_certificate() {
    let tower = default_tower(1);
    let sys = tower.system();
    let cert = verify_good_approx(sys, &tower.level(1).orbit, &tower.level(0).orbit, 0.0, 0.5).unwrap();
    assert_eq!(cert.included_blocks, 0);
    assert_eq!(cert.kappa, 0.0);
    assert!(!cert.gamma_bound_ok && !cert.kappa_ok && !cert.fibers_equal);
}

#[test]
fn small_c_is_rejected() {
    let cfg = TowerConfig { c: 100.0, ..TowerConfig::default() };
    let err = cfg.validate(&default_system()).unwrap_err();
    assert!(matches!(err, TowerError::Config(ref m) if m.contains("16/|chi_A|")));
    let cfg = TowerConfig { halving_ratio: 1.0, ..TowerConfig::default() };
    assert!(cfg.validate(&default_system()).is_err());
}

#[test]
fn default_tower_satisfies_the_level_conditions() {
    let tower = default_tower(4);
    assert_eq!(tower.top(), 4);
    let periods: Vec<u64> = tower.levels().iter().map(|l| l.period()).collect();
    assert_eq!(periods, vec![1, 17, 39, 357, 8941]);
    let c = tower.config().c;
    for n in 1..tower.top() {
        let (lv, next) = (tower.level(n), tower.level(n + 1));
        assert!(0.0 < next.chi && next.chi < 0.5 * lv.chi);
        let link = lv.link.as_ref().unwrap();
        assert!(link.certificate.passed());
        assert!(link.kappa >= 1.0 - c * lv.chi);
        assert!(link.gamma < tower.gamma_ceiling(n));
    }
    assert!(tower.level(1).chi < 1.0 / c);
}

#[test]
fn first_level_is_rejected_above_one_over_c() {
    let sys = default_system();
    let parent = Arc::new(realize_orbit(&sys, ItineraryWord::new(vec![Token::B(1)])).unwrap());
    let child = child_cycle(&sys, &parent, 1, 1, 0.0).unwrap();
    let orbit = Arc::new(realize_orbit(&sys, child.word).unwrap());
    let err = Tower::init(sys, TowerConfig::default(), orbit).unwrap_err();
    assert!(matches!(err, TowerError::InitRejected(_)));
}

#[test]
fn rebuilding_from_choices_reproduces_the_tower() {
    let tower = default_tower(3);
    let again = Tower::from_choices(tower.system().clone(), tower.config().clone(), &tower.choices()).unwrap();
    for (a, b) in tower.levels().iter().zip(again.levels()) {
        assert_eq!(a.period(), b.period());
        assert_eq!(a.orbit.base.x_c, b.orbit.base.x_c);
        assert_eq!(a.d, b.d);
        assert_eq!(a.kappa(), b.kappa());
    }
}

#[test]
fn bounds_on_the_default_tower() {
    let tower = default_tower(3);
    let rs = r_sequence(&tower).unwrap();
    assert_eq!(rs.len(), 3);
    assert!(rs.iter().all(|r| r.r < r.bound));
    let kp = kappa_product(&tower, 1).unwrap();
    assert!(kp.total > 0.0 && kp.total <= kp.built);
    let sb = support_bound(&tower, 1, 3).unwrap();
    assert_eq!(sb.ball_count, 17);
    assert!(sb.min_count >= sb.required);
    assert!(matches!(support_bound(&tower, 2, 2), Err(TowerError::BadLevel(_))));
}

#[test]
fn lm_of_word_reads_back_saddle_children() {
    let nu = crate::dd::dd(0.75);
    assert_eq!(lm_of_word(&ItineraryWord::lm(4, 2, nu)), Some((4, 2, nu)));
    assert_eq!(lm_of_word(&ItineraryWord::new(vec![Token::B(1)])), None);
}
