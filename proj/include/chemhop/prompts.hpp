#pragma once

#include <string_view>

// Prompt templates. Placeholders in braces are filled by text::fill_template.
namespace chemhop::prompts {

inline constexpr std::string_view kVersion = "chemhop-prompts-1";

inline constexpr std::string_view kEntityVerification =
    R"(You are a chemistry expert specializing in entity recognition. Your task is to validate and filter the extracted entities, ensuring they are chemically meaningful based on the provided text. Remove any irrelevant terms, including general descriptors, numerical values, reaction conditions, and vague terms.

Entities Extracted by NER:
{entities}

Text for Context:
{text}

Criteria for Valid Entities:
- Chemical compounds (e.g., "HCl", "Sodium hydroxide", "Ethanol", "Benzene")
- Chemical elements (e.g., "Carbon", "Oxygen", "Cesium")
- Specific catalysts, solvents, reagents (e.g., "Cs2CO3", "Toluene", "Palladium")

Remove the Following Types of Entities:
- Generic terms (e.g., "Reaction", "Solvent", "Acid", "Base", "Solution")
- Experimental conditions (e.g., "pH", "Temperature", "2 M", "Strong acid")
- Measurement terms (e.g., "X-ray diffraction", "NMR")
- General descriptors (e.g., "High concentration", "Low efficiency")

Output Format:
Return only a Python list of valid chemical entities, with no explanations, markdown, or extra formatting.)";

inline constexpr std::string_view kRelationExtraction =
    R"(You are an expert in chemical text analysis. Your task is to extract only chemically meaningful relationships between a given set of entities from the provided text.

Guidelines for Relation Extraction:
1. Entity Matching: Consider only the entities provided in the given set. If an entity appears in the text but has no meaningful chemical relationship with another entity in the set, ignore it.
2. Chemically Significant Relations Only: Extract relations that describe actual chemical interactions, transformations, or properties (e.g., "reacts with," "catalyzes," "dissolves in," "produces").
3. Factual Relations: Only extract factual relations. Avoid observations, opinions, and findings.
4. Tuple Format: Output extracted facts in the form of (entity1, relation, entity2).
5. Avoid Generic Relations: Exclude weak relations like "is," "are," "exists," "relates to." Focus on specific interactions.

Valid Relation Types (Examples):
- "reacts with"
- "catalyzes"
- "binds to"
- "dissolves in"
- "oxidizes"
- "inhibits"
- "precipitates with"
- "acts as a solvent for"
- "is synthesized from"

Avoid These Weak Relations:
Exclude relations such as "is," "are," "has," "exists."

Entities Provided:
{entities}

Text:
{text}

Extract at most {max_facts} factual statements.

Output Format:
Provide the output as a Python list of tuples, containing only the extracted relationships without any code formatting, backticks, or markdown.

Example Output:
[
("HCl", "dissolves in", "Water"),
("HCl", "reacts with", "Sodium hydroxide")
])";

inline constexpr std::string_view kOneHopQuestion =
    R"(You are given a text along with an entity and its relation to another entity.

Entity 1: {entity1}
Relation: {relation}
Entity 2: {entity2}
Text: {text}

Information about Entity1: {entity1_meta}

Your task is to generate a factual question whose answer is Entity1.
The question should ask for the entity that has the specified relation to Entity2.
Do not mention the answer (which is Entity1) in the question.
Ensure that the question is factual and can be answered solely based on the given text and the information about Entity1.
Do not refer to sections such as "Abstract," "Table #1," "in the text," or "in the article."

If Entity1 and relation are not specific enough (i.e., multiple answers are possible), add descriptions from the text or from the information about Entity1 to make it specific so that Entity1 is the only answer.

Return a dictionary without any code formatting, backticks, or markdown, with keys "q" and "a".)";

inline constexpr std::string_view kMultiHopAggregation =
    R"(You are given multiple factual questions and their answers that are logically connected.
Your task is to chain them into a single, coherent multi-hop question that requires multiple reasoning steps.
Ensure that the (only) answer is the answer to the first question, and the question naturally follows from the facts given.
You have to start from the last generated question and build up a single multi-hop question so it aggregates them all and the answer is the answer to the first question.
None of the answers to any of the questions should be in the generated question.

Here is an example:
Example:
Q1: What is oxidized to form Carbon Dioxide?
A1: Methane
Q2: What is used in Photosynthesis?
A2: Carbon Dioxide
Q3: What produces Oxygen?
A3: Photosynthesis

Multi-hop question:
Q: What is oxidized to produce a substance that is used in a process that results in Oxygen?
A: Methane

Here are the generated questions and answers:
{formatted_qas}

Return a Python dictionary without any code formatting, backticks, or markdown, with keys "q" (multi-hop question) and "a" (final answer).)";

inline constexpr std::string_view kOneHopVerification =
    R"(You are a chemistry expert. Your task is to determine if the given question is a factual chemistry question, unambiguous (has only one answer), and answerable based on the provided context. A factual question must be based on actual chemical properties, reactions, or experimentally verified principles and must be strictly related to chemistry. An answerable question should be solvable based on the given context and must not be open-ended or have multiple correct answers. MAKE SURE THE QUESTION HAS ONLY ONE CORRECT ANSWER. There shouldn't be any other entity except for the given answer that could be another answer.

### Question:
{question}

### Answer:
{answer}

### Context:
{context}

Please analyze the context and verify if the question is factual, unambiguous, and answerable. If the question is factual, has only one correct answer, is strictly related to chemistry, and can be answered based on the context, return "yes." Otherwise, return "no."

### Examples of Factual Chemistry Questions:
(valid) "What dissolves in water and evaporates at 0 °C?"
(valid) "What catalyst is used in the reaction between A and B?"

### Examples of Non-Factual or Ambiguous Chemistry Questions:
(invalid) "What is the song of Nirvana that is a chemical entity?"
(invalid) "What chemical entity and structural unit form the layered hydroxide structures with intercalated water ions used in battery materials and OER catalysis?" (M(OH)6 and α-Ni(OH)2 are valid answers)
(invalid) Questions that have multiple possible correct answers or are not strictly related to chemistry.)";

inline constexpr std::string_view kPathVerification =
    R"(You are a chemistry expert. Your task is to determine if the given question is a factual chemistry question and answerable based on the provided path.

### Path Information:
{path_text}

### Question:
{question}

### Answer:
{answer}

Please analyze the path and verify if the question is a factual chemistry question and can be answered based on the given path. A factual question must be based on actual chemical properties, reactions, or experimentally verified principles. An answerable question should be solvable based on the given path. If the question is factual and answerable, return "yes". If it contains speculation, opinions, or lacks verifiable chemical grounding, or it is not solvable, return "no".

### Examples of Factual Chemistry Questions:
(valid) "What dissolves in water?"
(valid) "What catalyst is used in the reaction between A and B?"
(valid) "Which compound undergoes oxidation in this reaction?"
(valid) "What product is formed when sodium reacts with chlorine?"

### Examples of Non-Factual Chemistry Questions:
(invalid) "Why do some scientists think this reaction is inefficient?"
(invalid) "What is the best solvent for this reaction?"
(invalid) "Is this reaction useful in industry?"
(invalid) "Do you think this compound is a good catalyst?"

Provide only "yes" or "no" as your response.)";

// Evaluation prompts, versioned with kVersion.

inline constexpr std::string_view kAnswerSystem =
    R"(You answer chemistry questions with a short answer (a name or a short phrase). Respond with a single JSON object of the form {"answer": "..."} and nothing else.)";

inline constexpr std::string_view kAnswerWithContext = R"(Context:
{context}

Question: {question})";

inline constexpr std::string_view kAnswerNoContext = R"(Question: {question})";

inline constexpr std::string_view kJudge =
    R"(Given a question, the gold answer, and a model's answer, decide whether the model's answer is correct, i.e. refers to the same entity or fact as the gold answer. Reply exactly CORRECT or INCORRECT.

Question: {question}
Gold answer: {gold}
Model answer: {prediction})";

}  // namespace chemhop::prompts
