//! The small five-attribute questionnaire used throughout the tests and docs.

use crate::dataset::Dataset;

pub const EXAMPLE_ATTRIBUTES: [&str; 5] = [
    "Education",
    "Income",
    "SocialSkills",
    "WorkAbility",
    "Communication",
];

pub const EXAMPLE_DOMAIN_SIZES: [usize; 5] = [2, 3, 2, 2, 2];

pub const EXAMPLE_TRAIN_ROWS: [[usize; 5]; 4] = [
    [0, 1, 0, 1, 1],
    [1, 2, 0, 0, 1],
    [1, 0, 1, 0, 1],
    [1, 0, 1, 1, 0],
];

pub const EXAMPLE_TEST_ROWS: [[usize; 5]; 2] = [[1, 1, 0, 1, 0], [1, 0, 1, 1, 0]];

fn build(rows: &[[usize; 5]]) -> Dataset {
    Dataset::from_indices(
        &EXAMPLE_ATTRIBUTES,
        &EXAMPLE_DOMAIN_SIZES,
        rows.iter().map(|r| r.to_vec()).collect(),
    )
    .expect("example rows are within their domains")
}

pub fn worked_example_train() -> Dataset {
    build(&EXAMPLE_TRAIN_ROWS)
}

pub fn worked_example_test() -> Dataset {
    build(&EXAMPLE_TEST_ROWS)
}

fn to_csv(rows: &[[usize; 5]]) -> String {
    let mut out = EXAMPLE_ATTRIBUTES.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(usize::to_string).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn worked_example_train_csv() -> String {
    to_csv(&EXAMPLE_TRAIN_ROWS)
}

pub fn worked_example_test_csv() -> String {
    to_csv(&EXAMPLE_TEST_ROWS)
}
