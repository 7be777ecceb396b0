mod common;

fn assert_ok(r: Result<(), String>) {
    if let Err(e) = r {
        panic!("{e}");
    }
}

#[test]
fn entropy_chain_rule() {
    assert_ok(common::entropy_chain_rule());
}

#[test]
fn eta_ball_monotone() {
    assert_ok(common::eta_ball_monotone());
}

#[test]
fn v_monotone() {
    assert_ok(common::v_monotone());
}

#[test]
fn phase_termination() {
    assert_ok(common::phase_termination());
}

#[test]
fn rate_accounting() {
    assert_ok(common::rate_accounting());
}

#[test]
fn randomized_c1_matches_deterministic() {
    assert_ok(common::randomized_c1_matches_deterministic());
}

#[test]
fn ipf_marginals() {
    assert_ok(common::ipf_marginals());
}

#[test]
fn r_star_monotone() {
    assert_ok(common::r_star_monotone());
}

#[test]
fn deterministic_inside_randomized() {
    assert_ok(common::deterministic_inside_randomized());
}
