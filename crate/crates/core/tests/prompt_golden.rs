//! Rendered prompts compared byte-for-byte against fully expanded literals.

use reasonrank_core::prompt::{PassageWindow, PromptBuilder, PromptMode};

const BASIC: &str = "\
I will provide you with 3 passages, each indicated by a number identifier [].\n\
For each passage, briefly generate your reasoning process as follows:\n\
1. Judge whether the passage is not applicable (not very common), where the query does not meet the\n\
premise of the passage.\n\
2. Check if the query contains direct evidence. If so, judge whether the query meets or does not meet\n\
the passage.\n\
3. If there is no direct evidence, try to infer from existing evidence and answer one question:\n\
If the passage is ranked in this order, is it possible that a good passage will miss such information?\n\
If impossible, then you can assume that the passage should not be ranked in that order.\n\
Otherwise, it should be ranked in that order.\n\
";

const EXPLICIT: &str = "\
Then, read every passage one-by-one and find the sentence where the method is the direct answer\n\
for the query and output the sentence. Then, rank the passages based on their relevance to the query.\n\
Give highest priority to passages that provide a clear and direct definition or explanation of the\n\
keywords related to the query.\n\
Consider both the detailed information and any relevant background context provided in each passage.\n\
Provide clear and concise reasons for the ranking, highlighting the specific parts of the passages that\n\
influenced your decision.\n\
Make sure to ignore any irrelevant information and focus on content directly related to the query.\n\
In addition to direct reasons for ranking each passage, also consider listwise reasons.\n\
";

const COMPARISON: &str = "\
A listwise reason involves comparing passages with each other to determine their relative importance.\n\
Specifically, compare passages to identify which ones provide more comprehensive, relevant, and accurate\n\
information in relation to the query.\n\
When providing listwise reasons, mention specific comparative insights, such as why one passage might be\n\
more relevant than another based on the overall context and detail provided.\n\
";

const RETURN: &str = "\
Search Query: how do vaccines train the immune system.\n\
Rank the 3 passages above based on their relevance to the search query and\n\
the extracted keywords. The passages should be listed in descending order using identifiers.\n\
The most relevant passages should be listed first. The output should be in JSON format.\n\
For each passage, provide the extracted keywords and detailed reasons for its ranking.\n\
Ensure to separate direct reasons and listwise reasons clearly.\n\
Mention specific parts of the passage that influenced your decision.\n\
Ensure the reasons are clear, concise, and directly related to the query,\n\
balancing direct definitions or explanations and relevant background information.\n\
Only output the JSON structured format.\n\
";

const PASSAGES: &str = "\
\n\
[1] Vaccines expose the body to a harmless antigen.\n\
[2] The 1918 influenza pandemic spread worldwide.\n\
[3] Memory B cells persist after vaccination {num} and respond quickly.\n\
\n\
";

fn window() -> PassageWindow {
    PassageWindow::from_slice(
        "q7",
        0,
        &[
            ("d10", "Vaccines expose the body to a harmless antigen."),
            ("d11", "The 1918   influenza pandemic\tspread worldwide."),
            ("d12", "Memory B cells persist after vaccination {num} and respond quickly."),
        ],
    )
}

fn render(mode: PromptMode) -> String {
    PromptBuilder::default().build("how do vaccines train the immune system", &window(), mode)
}

#[test]
fn basic_prompt_golden() {
    assert_eq!(render(PromptMode::Basic), [BASIC, PASSAGES, RETURN].concat());
}

#[test]
fn explicit_prompt_golden() {
    assert_eq!(render(PromptMode::Explicit), [BASIC, EXPLICIT, PASSAGES, RETURN].concat());
}

#[test]
fn comparison_prompt_golden() {
    assert_eq!(render(PromptMode::Comparison), [BASIC, COMPARISON, PASSAGES, RETURN].concat());
}

#[test]
fn combined_prompt_golden() {
    assert_eq!(
        render(PromptMode::Combined),
        [BASIC, EXPLICIT, COMPARISON, PASSAGES, RETURN].concat()
    );
}

#[test]
fn long_passages_are_cut_to_the_token_budget() {
    let long: String = (0..130).map(|i| format!("w{i} ")).collect();
    let w = PassageWindow::from_slice("q", 0, &[("d", long.as_str())]);
    let p = PromptBuilder::default().build("q", &w, PromptMode::Basic);
    let line = p.lines().find(|l| l.starts_with("[1] ")).unwrap();
    assert_eq!(line.split_whitespace().count(), 121);
    assert!(line.ends_with(" w119"));
}
