//! Prompt templates for every reasoning call.
//!
//! The clip-retrieval, speed and non-existence templates reproduce the
//! published annotation prompts. The key-phrase, caption, frame-verdict,
//! holistic and semantic templates are reconstructions in the same style.

use crate::domain::QAPair;

const RETRIEVAL_TASK: &str = "You are an expert in analyzing video clip descriptions. Your task is to select which clip or combination of clips is necessary to answer the given question, ensuring the selected clips effectively cover the content of both the question and the answer.";

const RETRIEVAL_GUIDELINES: [&str; 8] = [
    "Carefully read the descriptions to determine which clip(s) provide relevant content for the question and the answer.",
    "Clip descriptions are in chronological order. Use clip number to locate clips based on time-related expressions (e.g., \"at the beginning of the video\" suggests a smaller clip number, while \"at the end of the video\" suggests a larger one).",
    "First, determine if one clip can answer the question or if multiple clips are needed. Then, return a list containing the selected clip(s) and an explanation.",
    "If the question asks about the existence/movement of an object or event. The object/action/movement may not exist, meaning you can't find the answer in the description, but the question might still provide some clues. You need to find the sentence closest to those clues.",
    "If asked about the whole video description or overall atmosphere, you should return all clip numbers.",
    "If multiple clips provide similar descriptions of the content and any of them can be used to answer the question, return all corresponding clips.",
    "If there are no clues in all descriptions and cannot answer the question, return \"None.\".",
    "Important: Avoid including unnecessary clips.",
];

const RETRIEVAL_OUTPUT_FORMAT: &str = r#"1. Your output should be formed in a JSON file.
2. Only return the Python dictionary string.
For example:
{"explanation": "...", "clip_num": "One clip: [Clip-2]"}
{"explanation": "...", "clip_num": "Multiple clips: [Clip-1, Clip-7, Clip-8]"}
{"explanation": "...", "clip_num": "None."}"#;

fn qa_block(qa: &QAPair) -> String {
    format!("Question: {}\nAnswer: {}", qa.question_with_options(), qa.answer)
}

/// Clip-retrieval prompt over chronologically ordered captions.
pub fn retrieval_prompt(captions: &[String], qa: &QAPair) -> String {
    let mut out = String::new();
    out.push_str("Task:\n");
    out.push_str(RETRIEVAL_TASK);
    out.push_str("\n\nGuidelines:\n");
    for g in RETRIEVAL_GUIDELINES {
        out.push_str("- ");
        out.push_str(g);
        out.push('\n');
    }
    out.push_str("\nOutput Format:\n");
    out.push_str(RETRIEVAL_OUTPUT_FORMAT);
    out.push_str("\n\nClip descriptions:\n");
    for (i, c) in captions.iter().enumerate() {
        out.push_str(&format!("Clip-{i}: {}\n", c.trim()));
    }
    out.push('\n');
    out.push_str(&qa_block(qa));
    out.push('\n');
    out
}

const SPEED_TASK: &str = r#"Analyze the given QA pair to determine if the question is related to speed. Specifically, check if it involves either absolute speed (the speed of a specific object) or relative speed (comparing the speed of different objects). Provide an output of "Yes" if the question pertains to speed, and "No" otherwise.
Important: Respond with "Yes" or "No" only."#;

const SPEED_EXAMPLES: &str = r#"Question 1: Which is faster, the white car or the bicycle? Options:
A. The bicycle.
B. The white car.
C. Both are at the same speed.
D. None of the above.
Answer 1: B. The white car.
Output: Yes.
Question 2: What color is the cat ?Options:
A. black
B. white
C. orange
D. gray
Answer 2: C. orange
Output: No."#;

const NONEXISTENCE_TASK: &str = r#"Analyze the given QA pair to determine if the question inquires about the existence of an object or action. If it does, and the answer is "No" (indicating non-existence), output "Yes." If the question is not about existence, or the answer is "Yes" (indicating existence), output "No."
Important: Respond with "Yes" or "No" only."#;

const NONEXISTENCE_EXAMPLES: &str = r#"Question 1: After going through the bag, does the person meticulously clean the area around the sink?
Answer 1: No, the person does not clean the area around the sink after going through the bag. The video primarily focuses on the action of the person with the bag and items, not on cleaning activities.
Output: Yes.
Question 2: Is there a cat sitting on the windowsill in the video?
Answer 2: Yes, there is a cat sitting on the windowsill throughout the video.
Output: No."#;

const HOLISTIC_TASK: &str = r#"Analyze the given QA pair to determine if the question is open-ended or vague and concerns the video as a whole (for example, describing the entire video or its overall atmosphere) rather than specific objects, actions or moments. Provide an output of "Yes" if it does, and "No" otherwise.
Important: Respond with "Yes" or "No" only."#;

const HOLISTIC_EXAMPLES: &str = r#"Question 1: Please describe the video in detail.
Answer 1: A band performs on stage while the crowd cheers.
Output: Yes.
Question 2: What color is the cat?
Answer 2: Orange.
Output: No."#;

const SEMANTIC_TASK: &str = r#"Analyze the given QA pair to determine if answering the question requires recognizing specific semantic content such as people, objects, scenes or their attributes, beyond how things move. Provide an output of "Yes" if it does, and "No" otherwise.
Important: Respond with "Yes" or "No" only."#;

const SEMANTIC_EXAMPLES: &str = r#"Question 1: Could you describe the camera movement in the video?
Answer 1: The camera pans from the drummer's hands down to his feet on the pedals.
Output: Yes.
Question 2: Which is faster, the white car or the bicycle?
Answer 2: The white car.
Output: No."#;

fn classifier_prompt(task: &str, examples: &str, qa: &QAPair) -> String {
    format!("Task:\n{task}\n\nExample:\n{examples}\n\nNow analyze this QA pair.\n{}\nOutput:", qa_block(qa))
}

pub fn motion_prompt(qa: &QAPair) -> String {
    classifier_prompt(SPEED_TASK, SPEED_EXAMPLES, qa)
}

pub fn nonexistence_prompt(qa: &QAPair) -> String {
    classifier_prompt(NONEXISTENCE_TASK, NONEXISTENCE_EXAMPLES, qa)
}

pub fn holistic_prompt(qa: &QAPair) -> String {
    classifier_prompt(HOLISTIC_TASK, HOLISTIC_EXAMPLES, qa)
}

pub fn semantic_prompt(qa: &QAPair) -> String {
    classifier_prompt(SEMANTIC_TASK, SEMANTIC_EXAMPLES, qa)
}

pub fn key_phrase_prompt(qa: &QAPair) -> String {
    format!(
        "Task:\nRead the question and its answer. Write one short declarative sentence that states the key people, objects and actions needed to answer the question, combining facts from both.\nImportant: Return only the sentence.\n\n{}\n",
        qa_block(qa)
    )
}

pub fn caption_prompt(cue: &str, clip_ref: &str) -> String {
    format!(
        "Task:\nDescribe the attached video clip in detail: people, objects, actions and scene changes, in the order they happen.\nReference cue: {cue}\nMention details from the reference cue only if they are clearly visible in this clip. Do not infer anything from the cue alone.\n\nClip: {clip_ref}\n"
    )
}

pub fn verdict_prompt(frame_ref: &str, qa: &QAPair) -> String {
    format!(
        "Task:\nLook at the attached video frame and decide whether it shows visual evidence relevant to the question and the answer below. Provide an output of \"Yes\" if the frame is relevant, and \"No\" otherwise.\nImportant: Respond with \"Yes\" or \"No\" only.\n\nFrame: {frame_ref}\n{}\nOutput:",
        qa_block(qa)
    )
}
