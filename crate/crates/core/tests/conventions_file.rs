use heatvoid::validation::{determine_conventions, ValidationSettings};
use heatvoid::Conventions;

const CHECKED_IN: &str = include_str!("../../../conventions.toml");

#[test]
fn built_in_conventions_match_the_checked_in_file() {
    assert_eq!(Conventions::from_toml(CHECKED_IN).unwrap(), Conventions::default());
}

#[test]
fn rerunning_the_determination_reproduces_the_file() {
    let study = determine_conventions(&ValidationSettings::default()).unwrap();
    assert_eq!(study.conventions, Conventions::from_toml(CHECKED_IN).unwrap());
    assert!(study.gradient_products.iter().all(|&p| p > 0.0));
}
