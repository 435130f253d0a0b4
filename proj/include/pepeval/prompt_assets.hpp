#pragma once

// Prompt template texts and worked exemplars used by the prompt engine.
// These are the embedded defaults; every entry can be overridden through a
// template asset directory (see TemplateStore in prompts.hpp).
//
// The texts are frozen verbatim, including the typographic apostrophes and
// the occasional typo inside exemplar bodies. Placeholder names: {qst},
// {sol}, {ela}, {exemplars}, {CoT_Inst}, {PEP_Inst}, {IRR_Inst},
// {FORMAT_Inst}.

#include <array>

namespace pepeval::assets {

inline constexpr const char* kCotInst =
    R"pep(Let's solve the problem step by step.)pep";
inline constexpr const char* kPepInst =
    R"pep(Decompose the given question into smaller segments, elucidating each segment as you rephrase it.)pep";
inline constexpr const char* kIrrInst =
    R"pep(Feel free to ignore irrelevant information given in the questions.)pep";
inline constexpr const char* kFormatInstFree =
    R"pep(End the solution in the format: 'Final answer: \boxed{X}', where X is arabic numerals or 'N\A' if the problem is unsolvable.)pep";
inline constexpr const char* kFormatInstChoice =
    R"pep(End the solution in the format: 'Final answer: \boxed{X}', where X is the choice.)pep";

// Ablation variants: decompose-only, elucidate-only, elucidate-then-decompose.
inline constexpr const char* kDecInst =
    R"pep(Decompose the given question into smaller segments.)pep";
inline constexpr const char* kEluInst =
    R"pep(Elucidate the given question as you rephrase it.)pep";
inline constexpr const char* kEtdInst =
    R"pep(Elucidate the given question as you rephrase it, then decompose it into smaller segments.)pep";

inline constexpr const char* kZeroShotCot =
    R"pep({CoT_Inst} {IRR_Inst}{FORMAT_Inst}
Question: {qst})pep";
inline constexpr const char* kZeroShotPep =
    R"pep({PEP_Inst} Then, solve the problem step by step. {IRR_Inst}{FORMAT_Inst}
Question: {qst})pep";
// Elaboration-only request, used as pass one of the code-generation pipeline.
inline constexpr const char* kElaborationOnly =
    R"pep({PEP_Inst}
Question: {qst})pep";
inline constexpr const char* kFewShotHeader =
    R"pep(Solve grade school math problems.)pep";

// Few-shot scaffolds; {exemplars} is filled with the first k worked examples.
inline constexpr const char* kFewShotTailCot =
    R"pep({exemplars}
Question: {qst}
Answer:)pep";
inline constexpr const char* kFewShotTailL2m =
    R"pep({exemplars}
Question: {qst}
Answer: Let’s break down this problem:)pep";
inline constexpr const char* kFewShotTailPep =
    R"pep({exemplars}

Question: {qst}
Problem Elaboration:)pep";
inline constexpr const char* kFewShotTailSelfAsk =
    R"pep({exemplars}

Question: {qst}
Are follow up questions needed here: Yes.
Follow up:)pep";
inline constexpr const char* kFewShotTailPas =
    R"pep({exemplars}

Question: {qst}
Plan:)pep";

inline constexpr const char* kPotTemplate =
    R"pep(# Question: {qst}
{ela}

# Answer the question by implementing a solution() function.
# Generate the code only.
# Let's write a Python program step by step, and then return the answer
# Firstly, we need write the solution() starting with defining variable:)pep";
inline constexpr const char* kExtractTemplate =
    R"pep(Given the textual solution or code execution solution, output the numeric answer that can be converted into float value of the problem. If the solution does not yield a result, output "unsolved". Only output the numeric value or "unsolved".

### Example:
Solution: The total amount of money Janet makes from selling eggs at the farmers' market per day is 21 - 4 = 17 eggs x $2 = $34.
Therefore, the final answer is: Janet makes $34 per day at the farmers' market.
Answer: $34
Result: 34
###
Original Problem: {qst}
Solution: {sol}
Result:)pep";

struct ExemplarText {
    const char* question;
    const char* body;
};

inline constexpr std::array<ExemplarText, 4> kCotExemplars = {{
    {R"pep(Elsa has 5 apples. Anna has 2 more apples than Elsa. How many apples do they have together?)pep",
     R"pep(Answer: Anna has 2 more apples than Elsa, so Anna has 2 + 5 = 7 apples. Elsa and Anna have 5 + 7 = 12 apples together. The answer is 12.)pep"},
    {R"pep(Four years ago, Kody was only half as old as Mohamed. If Mohamed is currently twice 30 years old, how old is Kody?)pep",
     R"pep(Answer: We were told that Mohamed is currently twice 30 years old, so he is currently 30 * 2 = 60 years old. That means that four years ago he must have been 60 - 4 = 56 years old. Four years ago, Kody was half as old as Mohamed, so Kody must have been 56 / 2 = 28 years old then. Since Kody was 28 years old four years ago, she must now be 28 + 4 = 32 years old. The answer is 32.)pep"},
    {R"pep(Carla bought 2 bags of mini peanut butter cups on clearance. Each bag was $6.00 but was 75% off. How much did she spend on 2 bags of candy?)pep",
     R"pep(Answer: Each bag was $6.00 but was 75% off. So each bag cost $6.00 * (1 - 0.75) = $6.00 * 0.25 = $1.50. Carla bought 2 bags. So she spent $1.50 * 2 = $3.00. The answer is 3.)pep"},
    {R"pep(If Pam is currently twice as young as Rena is, and in 10 years Rena will be 5 years older than her, how old is Pam now?)pep",
     R"pep(Answer: Since Rena will be 5 years older than Pam in 10 years, she must be 5 years older than Pam now as well. If Pam is currently twice as young as Rena, that means that Rena is currently twice as old as Pam is. So if P stands for Pam’s age now and R stands for Rena’s age now, then we know that R = 2 * P And since Rena is 5 years older than Pam now, we know that R = P + 5. By substitution, we have P + 5 = 2 * P, which means that P = 5. The answer is 5.)pep"},
}};

inline constexpr std::array<ExemplarText, 4> kPepExemplars = {{
    {R"pep(Elsa has 5 apples. Anna has 2 more apples than Elsa. How many apples do they have together?)pep",
     R"pep(Problem Elaboration:
Segment 1: Elsa has 5 apples. This segment tells us the number of apples Elsa has.
Segment 2: Anna has 2 more apples than Elsa. This segment tells us that Anna has more apples than Elsa, specifically 2 more.
Segment 3: How many apples do they have together? This segment is asking us to find the total number of apples both Elsa and Anna have combined.
Solution:
Step 1: Determine the number of apples Elsa has. Elsa has 5 apples.
Step 2: Determine the number of apples Anna has. Anna has 2 more apples than Elsa, so she has 5 + 2 = 7 apples.
Step 3: Determine the total number of apples they have together. Together, Elsa and Anna have 5 + 7 = 12 apples. The answer is 12.)pep"},
    {R"pep(Four years ago, Kody was only half as old as Mohamed. If Mohamed is currently twice 30 years old, how old is Kody?)pep",
     R"pep(Problem Elaboration:
Segment 1: Four years ago, Kody was only half as old as Mohamed. This means that the age difference between Kody and Mohamed is constant and it is the same four years ago as it is now.
Segment 2: If Mohamed is currently twice 30 years old. This means that Mohamed's current age is 60 years old.
Solution:
Step 1: Determine Mohamed's age four years ago. If Mohamed is currently 60 years old, then four years ago he was 60 - 4 = 56 years old.
Step 2: Determine Kody's age four years ago. Since Kody was half as old as Mohamed four years ago, then Kody was 56 / 2 = 28 years old four years ago.
Step 3: Determine Kody's current age. If Kody was 28 years old four years ago, then Kody is currently 28 + 4 = 32 years old. The answer is 32.)pep"},
    {R"pep(Carla bought 2 bags of mini peanut butter cups on clearance. Each bag was $6.00 but was 75% off. How much did she spend on 2 bags of candy?)pep",
     R"pep(Problem Elaboration:
Segment 1: Identify the original price of the bags of candy. The original price of each bag of candy is $6.00.
Segment 2: Determine the discount on each bag. The bags are 75% off.
Segment 3: Calculate the discounted price of each bag. To find the discounted price, we need to calculate 75% of $6.00.
Segment 4: Determine the total cost for 2 bags. Once we have the discounted price of one bag, we multiply it by 2 to find the total cost for 2 bags.
Solution:
Step 1: The original price of each bag is $6.00.
Step 2: The discount on each bag is 75%.
Step 3: To calculate 75% of $6.00, we multiply 6 by 0.75, which equals $4.50. This means that $4.50 is the amount of the discount.
Step 4: To find the discounted price of each bag, we subtract the discount from the original price. So, $6.00 - $4.50 = $1.50. Each bag costs $1.50 after the discount.
Step 5: To find the total cost for 2 bags, we multiply the discounted price by 2. So, $1.50 * 2 = $3.00. The answer is 3.)pep"},
    {R"pep(If Pam is currently twice as young as Rena is, and in 10 years Rena will be 5 years older than her, how old is Pam now?)pep",
     R"pep(Problem Elaboration:
Segment 1: Pam is currently twice as young as Rena is. This means that Pam's current age is half of Rena's current age.
Segment 2: In 10 years, Rena will be 5 years older than Pam. This means that if we add 10 years to both Pam's and Rena's current ages, the difference between their ages will be 5 years.
Solution:
Step 1: Let's denote Rena's current age as R and Pam's current age as P. From the first segment, we know that P = R/2.
Step 2: From the second segment, we know that R + 10 = P + 10 + 5. We can simplify this to R = P + 5.
Step 3: Now we can substitute P from the first equation into the second equation. So, R = R/2 + 5.
Step 4: To solve for R, we multiply both sides of the equation by 2 to get rid of the fraction. This gives us 2R = R + 10.
Step 5: Subtract R from both sides to get R = 10. So, Rena is currently 10 years old.
Step 6: Substitute R = 10 into the first equation to find P. This gives us P = 10/2 = 5. So, Pam is currently 5 years old. The answer is 5.)pep"},
}};

inline constexpr std::array<ExemplarText, 4> kL2mExemplars = {{
    {R"pep(Elsa has 5 apples. Anna has 2 more apples than Elsa. How many apples do they have together?)pep",
     R"pep(Answer: Let’s break down this problem: 1. How many apples does Anna have? 2. How many apples do Elsa and Anna have together?
1. Anna has 2 more apples than Elsa. So Anna has 2 + 5 = 7 apples.
2. Elsa and Anna have 5 + 7 = 12 apples together. The answer is 12.)pep"},
    {R"pep(Four years ago, Kody was only half as old as Mohamed. If Mohamed is currently twice 30 years old, how old is Kody?)pep",
     R"pep(Answer: Let’s break down this problem: 1. How old was Mohamed four years ago? 2. How old is Kody?
1. We were told that Mohamed is currently twice 30 years old, so he is currently 30 * 2 = 60 years old. That means that four years ago he must have been 60 - 4 = 56 years old.
2. Four years ago, Kody was half as old as Mohamed, so Kody must have been 56 / 2 = 28 years old then. Since Kody was 28 years old four years ago, she must now be 28 + 4 = 32 years old. The answer is 32.)pep"},
    {R"pep(Carla bought 2 bags of mini peanut butter cups on clearance. Each bag was $6.00 but was 75% off. How much did she spend on 2 bags of candy?)pep",
     R"pep(Answer: Let’s break down this problem: 1. How much did she spend on 2 bags of candy?
1. Each bag was $6.00 but was 75% off. So each bag cost $6.00 * (1 - 0.75) = $6.00 * 0.25 = $1.50. Carla bought 2 bags. So she spent $1.50 * 2 = $3.00. The answer is 3.)pep"},
    {R"pep(If Pam is currently twice as young as Rena is, and in 10 years Rena will be 5 years older than her, how old is Pam now?)pep",
     R"pep(Answer: Let’s break down this problem: 1. How much older is Rena than Pam currently? 2. How old is Pam now?
1. Since Rena will be 5 years older than Pam in 10 years, she must be 5 years older than Pam now as well.
2. If Pam is currently twice as young as Rena, that means that Rena is currently twice as old as Pam is. So if P stands for Pam’s age now and R stands for Rena’s age now, then we know that R =2 * P And since Rena is 5 years older than Pam now, we know that R = P + 5. By substitution, we have P + 5 = 2 * P, which means that P = 5. The answer is 5.)pep"},
}};

inline constexpr std::array<ExemplarText, 4> kSelfAskExemplars = {{
    {R"pep(Elsa has 5 apples. Anna has 2 more apples than Elsa. How many apples do they have together?)pep",
     R"pep(Are follow up questions needed here: Yes.
Follow up: How many apples does Anna have?
Intermediate answer: Anna has 5 + 2 = 7 apples.
Follow up: How many apples do Elsa and Anna have together?
Intermediate answer: Elsa and Anna have 5 + 7 = 12 apples together. The answer is 12.)pep"},
    {R"pep(Four years ago, Kody was only half as old as Mohamed. If Mohamed is currently twice 30 years old, how old is Kody?)pep",
     R"pep(Are follow up questions needed here: Yes.
Follow up: How old is Mohamed currently?
Intermediate answer: Mohamed is 30 * 2 = 60 years old.
Follow up: How old was Kody four years ago?
Intermediate answer: Kody was (60 - 4) / 2 = 28 years old four years ago.
So the final answer is: Kody is 28 + 4 = 32 years old. The answer is 32.)pep"},
    {R"pep(Carla bought 2 bags of mini peanut butter cups on clearance. Each bag was $6.00 but was 75% off. How much did she spend on 2 bags of candy?)pep",
     R"pep(Are follow up questions needed here: Yes.
Follow up: How much was the discount for each bag?
Intermediate answer: The discount for each bag is $6.00 * 75% = $4.50.
Follow up: How much did Carla pay for each bag after the discount?
Intermediate answer: Carla paid $6.00 - $4.50 = $1.50 for each bag.
So the final answer is: Carla spent $1.50 * 2 = $3.00 on 2 bags of candy. The answer is 3.00.)pep"},
    {R"pep(If Pam is currently twice as young as Rena is, and in 10 years Rena will be 5 years older than her, how old is Pam now?)pep",
     R"pep(Are follow up questions needed here: Yes.
Follow up: What about Rena and Pam's current ages?
Intermediate answer: It tells us that Rena's age is twice Pam's age. So if P stands for Pam’s age now and R for Rena’s age now, then R = 2 * P. And since Rena is 5 years older than Pam now, we have R = P + 5.
Follow up: What is Pam’s age now?
Final answer: By substituting P + 5 in place of R in equation R = 2 * P, we get P + 5 = 2 * P, which simplifies to P = 5. So, Pam is 5 years old. The answer is 5.)pep"},
}};

inline constexpr std::array<ExemplarText, 4> kPasExemplars = {{
    {R"pep(Elsa has 5 apples. Anna has 2 more apples than Elsa. How many apples do they have together?)pep",
     R"pep(Plan:
Step 1: Find out how many apples Anna has.
Step 2: Add the number of apples Elsa has to the number of apples Anna has to find the total number of apples they have together.
Solution:
Step 1: Anna has 5 + 2 = 7 apples.
Step 2: Together, Elsa and Anna have 5 (Elsa's apples) + 7 (Anna's apples) = 12 apples. So, Elsa and Anna have 12 apples together. The answer is 12.)pep"},
    {R"pep(Four years ago, Kody was only half as old as Mohamed. If Mohamed is currently twice 30 years old, how old is Kody?)pep",
     R"pep(Plan:
Step 1: Find out how old Mohamed is currently.
Step 2: Find out how old Mohamed was four years ago.
Step 3: Since Kody was half as old as Mohamed four years ago, find out Kody's age four years ago.
Step 4: Add four years to Kody's age to find out his current age.
Solution:
Step 1: Mohamed is currently 2 * 30 = 60 years old.
Step 2: Four years ago, Mohamed was 60 - 4 = 56 years old.
Step 3: Four years ago, Kody was 56 / 2 = 28 years old.
Step 4: Currently, Kody is 28 + 4 = 32 years old. So, Kody is 32 years old. The answer is 32.)pep"},
    {R"pep(Carla bought 2 bags of mini peanut butter cups on clearance. Each bag was $6.00 but was 75% off. How much did she spend on 2 bags of candy?)pep",
     R"pep(Plan:
Step 1: Find out how much discount Carla got on each bag.
Step 2: Subtract the discount from the original price to find out the price Carla paid for each bag.
Step 3: Multiply the price Carla paid for each bag by the number of bags she bought to find out how much she spent in total.
Solution:
Step 1: The discount on each bag is 75/100 * $6.00 = $4.50.
Step 2: The price Carla paid for each bag is $6.00 - $4.50 = $1.50.
Step 3: Carla spent $1.50 * 2 = $3.00 on 2 bags of candy. So, Carla spent $3.00 on 2 bags of candy. The answer is 3.00.)pep"},
    {R"pep(If Pam is currently twice as young as Rena is, and in 10 years Rena will be 5 years older than her, how old is Pam now?)pep",
     R"pep(Plan:
Step 1: Set up an equation based on the information that Rena's age is twice Pam's age.
Step 2: Set up another equation based on the information that Rena is 5 years older than Pam.
Step 3: Substitute the second equation into the first to solve for Pam's age.
Solution:
Step 1: If P stands for Pam’s age now and R for Rena’s age now, then R = 2 * P.
Step 2: And since Rena is 5 years older than Pam now, we have R = P + 5.
Step 3: By substituting P + 5 in place of R in equation R = 2 * P, we get P + 5 = 2 * P, which simplifies to P = 5. So, Pam is 5 years old. The answer is 5.)pep"},
}};

// Elaboration blocks reused when weaving an elaboration into another
// method's exemplars (the segment lists of the worked elaboration examples).
inline constexpr std::array<const char*, 4> kPepElaborations = {
    R"pep(Segment 1: Elsa has 5 apples. This segment tells us the number of apples Elsa has.
Segment 2: Anna has 2 more apples than Elsa. This segment tells us that Anna has more apples than Elsa, specifically 2 more.
Segment 3: How many apples do they have together? This segment is asking us to find the total number of apples both Elsa and Anna have combined.)pep",
    R"pep(Segment 1: Four years ago, Kody was only half as old as Mohamed. This means that the age difference between Kody and Mohamed is constant and it is the same four years ago as it is now.
Segment 2: If Mohamed is currently twice 30 years old. This means that Mohamed's current age is 60 years old.)pep",
    R"pep(Segment 1: Identify the original price of the bags of candy. The original price of each bag of candy is $6.00.
Segment 2: Determine the discount on each bag. The bags are 75% off.
Segment 3: Calculate the discounted price of each bag. To find the discounted price, we need to calculate 75% of $6.00.
Segment 4: Determine the total cost for 2 bags. Once we have the discounted price of one bag, we multiply it by 2 to find the total cost for 2 bags.)pep",
    R"pep(Segment 1: Pam is currently twice as young as Rena is. This means that Pam's current age is half of Rena's current age.
Segment 2: In 10 years, Rena will be 5 years older than Pam. This means that if we add 10 years to both Pam's and Rena's current ages, the difference between their ages will be 5 years.)pep",
};

// The first exemplar of the integrated one-shot form ships in its original
// printed form: a compact elaboration ending in a rephrased question, and a
// body that refers to "this rephrased problem".
inline constexpr const char* kL2mIntegratedElaboration =
    R"pep(Segment 1: Elsa has 5 apples.
Segment 2: Anna has 2 more apples than Elsa.
Segment 3: How many apples do they have together?
Rephrased question: If Elsa has 5 apples and Anna has 2 more apples than Elsa, how many apples do they have together?)pep";
inline constexpr const char* kL2mIntegratedBody =
    R"pep(Answer: Let’s break down this rephrased problem: 1. How many apples does Anna have? 2. How many apples do Elsa and Anna have together?
1. Anna has 2 more apples than Elsa. So Anna has 2 + 5 = 7 apples.
2. Elsa and Anna have 5 + 7 = 12 apples together.)pep";

struct InstructionCandidate {
    const char* label;
    const char* text;
};

// Default zero-shot instruction candidates for the selection procedure.
inline constexpr std::array<InstructionCandidate, 7> kInstructionCandidates = {{
    {"C0", R"pep(Think it step by step.)pep"},
    {"C1", R"pep(Solve the question step by step)pep"},
    {"P1", R"pep(Decompose the given question into smaller segments, elucidating each segment as you rephrase it.)pep"},
    {"P2", R"pep(Break down the following question into concise phrases and elaborate on each phrase while rewriting.)pep"},
    {"P3", R"pep(Rewrite the following question by decomposing it into shorter clauses and providing explanations for each clause.)pep"},
    {"P4", R"pep(Restructure the subsequent question by dissecting it into more concise clauses and enhancing clarity through explanatory rephrasing.)pep"},
    {"P5", R"pep(Break down the problem into independent, concise, and complete phrases, aligning the meaning of each phrase with the original text. Focus on expressing only one concept, action, or condition in each phrase. Then, provide detailed explanations for each phrase, analyzing the implicit messages, defining terms, and using precise professional vocabulary to accurately convey the meaning, aiming to match the potential intention of the target problem.)pep"},
}};

// Name -> text map for the template asset directory (one file per template).
struct NamedTemplate {
    const char* name;
    const char* text;
};

inline constexpr std::array<NamedTemplate, 17> kNamedTemplates = {{
    {"cot_inst", kCotInst},
    {"pep_inst", kPepInst},
    {"irr_inst", kIrrInst},
    {"format_inst_free", kFormatInstFree},
    {"format_inst_choice", kFormatInstChoice},
    {"dec_inst", kDecInst},
    {"elu_inst", kEluInst},
    {"etd_inst", kEtdInst},
    {"zero_shot_cot", kZeroShotCot},
    {"zero_shot_pep", kZeroShotPep},
    {"elaboration_only", kElaborationOnly},
    {"few_shot_header", kFewShotHeader},
    {"few_shot_tail_cot", kFewShotTailCot},
    {"few_shot_tail_l2m", kFewShotTailL2m},
    {"few_shot_tail_pep", kFewShotTailPep},
    {"few_shot_tail_self_ask", kFewShotTailSelfAsk},
    {"few_shot_tail_pas", kFewShotTailPas},
}};

inline constexpr const char* kPotTemplateName = "pot_zero_shot";
inline constexpr const char* kExtractTemplateName = "extract_template";

}  // namespace pepeval::assets
