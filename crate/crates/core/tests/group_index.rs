use num_rational::Ratio;
use proptest::prelude::*;
use syncteam::{
    connectivity, group_index, individual_index, most_synchronous_person, AgentId, EdgePolicy,
    GroupTopologyGraph,
};

type Q = Ratio<i64>;

fn r(n: i64, d: i64) -> Q {
    Ratio::new(n, d)
}

/// Agents 0..h-1 are humans; when `robot` is set, agent h-1 is the robot.
fn agents(h: usize, robot: bool) -> Vec<AgentId> {
    (0..h as u32)
        .map(|i| {
            if robot && i as usize == h - 1 {
                AgentId::robot(i)
            } else {
                AgentId::human(i)
            }
        })
        .collect()
}

fn graph(ids: &[AgentId], w: &[Vec<Q>], policy: EdgePolicy) -> GroupTopologyGraph<Q> {
    let mut g = GroupTopologyGraph::new(ids.iter().copied());
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            g.connect(ids[i], ids[j], w[i][j], policy).unwrap();
        }
    }
    g
}

/// Individual index, connectivity and group index straight from the weight
/// matrix and the edge rule.
fn oracle(ids: &[AgentId], w: &[Vec<Q>], msp: Option<usize>) -> (Vec<Q>, Vec<Q>, Q) {
    let h = ids.len();
    let mut ind = Vec::new();
    let mut cv = Vec::new();
    for a in 0..h {
        let targets: Vec<usize> = match msp {
            Some(m) if ids[a].is_robot() => vec![m],
            _ => (0..h).filter(|&b| b != a).collect(),
        };
        let sum: Q = targets.iter().map(|&b| w[a][b]).sum();
        ind.push(sum / targets.len() as i64);
        cv.push(r(targets.len() as i64, h as i64 - 1));
    }
    let g = ind.iter().zip(&cv).map(|(i, c)| i * c).sum::<Q>() / h as i64;
    (ind, cv, g)
}

fn weights(h: usize) -> impl Strategy<Value = Vec<Vec<Q>>> {
    prop::collection::vec(0i64..=12, h * h).prop_map(move |raw| {
        let mut w = vec![vec![Q::from_integer(0); h]; h];
        for i in 0..h {
            for j in i + 1..h {
                let q = r(raw[i * h + j], 12);
                w[i][j] = q;
                w[j][i] = q;
            }
        }
        w
    })
}

fn case() -> impl Strategy<Value = (usize, bool, usize, Vec<Vec<Q>>)> {
    (2usize..=7, any::<bool>(), any::<prop::sample::Index>()).prop_flat_map(|(h, robot, pick)| {
        let robot = robot && h >= 3;
        let humans = if robot { h - 1 } else { h };
        (Just(h), Just(robot), Just(pick.index(humans)), weights(h))
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1_000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn indices_match_the_matrix_oracle_exactly((h, robot, msp, w) in case()) {
        let ids = agents(h, robot);
        let policy = if robot { EdgePolicy::RobotFollows(ids[msp]) } else { EdgePolicy::FullyConnected };
        let g = graph(&ids, &w, policy);
        let (ind, cv, group) = oracle(&ids, &w, robot.then_some(msp));
        let report = group_index(&g).unwrap();
        for (k, a) in ids.iter().enumerate() {
            prop_assert_eq!(individual_index(&g, *a).unwrap(), ind[k]);
            prop_assert_eq!(connectivity(&g, *a).unwrap(), cv[k]);
            prop_assert_eq!(report.individual(*a), Some(ind[k]));
        }
        prop_assert_eq!(report.group, group);
        prop_assert_eq!(report.recompute_group(), group);
    }

    #[test]
    fn float_group_index_tracks_the_exact_one((h, robot, msp, w) in case()) {
        let ids = agents(h, robot);
        let policy = if robot { EdgePolicy::RobotFollows(ids[msp]) } else { EdgePolicy::FullyConnected };
        let exact = group_index(&graph(&ids, &w, policy)).unwrap();
        let g = graph(&ids, &w, policy).map_weights(|q| *q.numer() as f64 / *q.denom() as f64);
        let approx = group_index(&g).unwrap();
        let want = *exact.group.numer() as f64 / *exact.group.denom() as f64;
        prop_assert!((approx.group - want).abs() <= 1e-12);
        prop_assert_eq!(approx.recompute_group(), approx.group);
    }

    #[test]
    fn scaling_every_index_keeps_the_msp((h, _robot, _msp, w) in case(), num in 1i64..=16) {
        let ids = agents(h, false);
        let k = r(num, 16);
        let scaled: Vec<Vec<Q>> = w.iter().map(|row| row.iter().map(|q| q * k).collect()).collect();
        let before = group_index(&graph(&ids, &w, EdgePolicy::FullyConnected)).unwrap();
        let after = group_index(&graph(&ids, &scaled, EdgePolicy::FullyConnected)).unwrap();
        prop_assert_eq!(
            most_synchronous_person(&before, &ids).unwrap(),
            most_synchronous_person(&after, &ids).unwrap()
        );
        let ind: Vec<Q> = ids.iter().map(|a| before.individual(*a).unwrap()).collect();
        let best = ind.iter().copied().fold(ind[0], |m, x| if x > m { x } else { m });
        let first = ind.iter().position(|&x| x == best).unwrap();
        prop_assert_eq!(most_synchronous_person(&before, &ids).unwrap(), ids[first]);
    }
}

#[test]
fn three_humans_and_a_following_robot() {
    let ids = agents(4, true);
    let mut w = vec![vec![r(3, 5); 4]; 4];
    for (i, row) in w.iter_mut().enumerate() {
        row[i] = r(0, 1);
        row[3] = r(3, 10);
    }
    for q in w[3].iter_mut().take(3) {
        *q = r(3, 10);
    }
    let g = graph(&ids, &w, EdgePolicy::RobotFollows(ids[0]));
    let report = group_index(&g).unwrap();
    for h in &ids[..3] {
        assert_eq!(report.individual(*h), Some(r(1, 2)));
        assert_eq!(report.connectivity(*h), Some(r(1, 1)));
    }
    assert_eq!(report.individual(ids[3]), Some(r(3, 10)));
    assert_eq!(report.connectivity(ids[3]), Some(r(1, 3)));
    assert_eq!(report.group, r(2, 5));
}

#[test]
fn connectivity_of_common_shapes() {
    for h in 2..=6 {
        let ids = agents(h, false);
        let w = vec![vec![r(1, 1); h]; h];
        let g = graph(&ids, &w, EdgePolicy::FullyConnected);
        for a in &ids {
            assert_eq!(connectivity(&g, *a).unwrap(), r(1, 1));
        }
        assert_eq!(group_index(&g).unwrap().group, r(1, 1));
    }
}

#[test]
fn single_pair_group_index_is_the_pair_index() {
    let ids = agents(2, false);
    for n in 0..=8 {
        let q = r(n, 8);
        let w = vec![vec![q; 2]; 2];
        assert_eq!(group_index(&graph(&ids, &w, EdgePolicy::FullyConnected)).unwrap().group, q);
    }
}

#[test]
fn msp_ties_go_to_the_lowest_id() {
    let ids = agents(3, false);
    let w = vec![vec![r(1, 2); 3]; 3];
    let report = group_index(&graph(&ids, &w, EdgePolicy::FullyConnected)).unwrap();
    assert_eq!(most_synchronous_person(&report, &ids).unwrap(), ids[0]);
}

#[test]
fn degenerate_graphs_are_errors() {
    let g: GroupTopologyGraph<Q> = GroupTopologyGraph::new([AgentId::human(0)]);
    assert!(group_index(&g).is_err());
    let mut g: GroupTopologyGraph<Q> = GroupTopologyGraph::new([AgentId::human(0), AgentId::human(1)]);
    assert!(g.add_edge(AgentId::human(0), AgentId::human(0), r(1, 2)).is_err());
}
