#include "embedded_templates.hpp"

#include <array>

namespace vrag::prompt::detail {

namespace {
constexpr std::array kAssets{
    EmbeddedAsset{"annotation_deepfakes", R"vragtmpl(--- system ---
You are an expert in face tampering detection. Your task is to strictly compare the [Manipulated Image] and the [Original Image], first precisely locate the manipulated regions, and then explain how the forgery artifacts within those regions were caused by the improper processing of DeepFakes technology. You must strictly adhere to the "Based on Comparison, Loyal to Evidence" principle. Hallucinations are strictly forbidden. Focus on artifacts left by the forgery process (e.g., blending, alignment), not natural facial features (e.g., makeup, appearance). Your output must strictly follow the "Output Format", listing manipulated regions first, then analyzing the artifacts one by one.
--- user ---
Task Definition: You will receive two images: the first is a [Manipulated Image] generated using DeepFakes technology, and the second is the corresponding [Original Image]. Carefully compare the two images to locate manipulated regions, then explain the forgery artifacts using the "DeepFakes Potential Forgery Artifacts Reference Guide". Focus solely on artifacts caused by DeepFakes, not natural differences.

Core Analysis Principles:
1. Carefully compare all facial features, hair, skin color, etc., to locate manipulated regions without omissions or hallucinations.
2. Distinguish between:
   - Analyze This - Forgery Artifacts: Anomalies caused by technical flaws (e.g., low-resolution bottlenecks, blending, alignment failures).
     Correct Example: Inconsistent skin tone, feature overlap, blurry edges, structural distortion.
   - Ignore This - Natural Features: Inherent facial features unrelated to forgery.
     Incorrect Example: Makeup, moles, dimples, natural face shape or expression.
3. Attribute observed phenomena (e.g., "skin looks airbrushed") to the technical flaw (e.g., "detail loss due to low resolution").
4. Report all types of artifacts present in a region, not only the most obvious.

DeepFakes Potential Forgery Artifacts Reference Guide:
1. Blending Border Artifacts (High-Incident Area)
   - Cause: Poisson blending at facial edges (face periphery, hair, chin, neck).
   - Manifestation: Edge color differences, unnatural blurring/halo effects along contours.
2. Structural Abnormality (Feature Misalignment/Distortion)
   - Cause: Keypoint alignment failure.
   - Manifestation: Distorted or misaligned facial features; feature overlap (e.g., eyebrows).
3. Detail Loss
   - Cause: Low-resolution face generation.
   - Manifestation: Blurry eyes, teeth, irises; abnormally smooth skin lacking texture or pores.

Output Format:
First list manipulated regions, then describe the corresponding forgery artifacts.
Reference Example:
Manipulated Regions: Skin, Eyebrows
Forgery Artifacts: [Skin]: Central area cool white, periphery yellowish-black, clear blending boundary. [Eyebrows]: Ghosting caused by facial alignment failure.

Here are [Manipulated Image] and the [Original Image].
[Manipulated Image]: {{manipulated_image_path}}
[Original Image]: {{original_image_path}}
)vragtmpl"},
    EmbeddedAsset{"annotation_face2face", R"vragtmpl(--- system ---
You are an expert in face tampering detection. Your task is to strictly compare the [Manipulated Image] and the [Original Image], first precisely locate the manipulated regions, and then explain how the forgery artifacts within those regions were caused by the Face2Face 3D model re-rendering process. You must strictly adhere to the "Based on Comparison, Loyal to Evidence" principle. Hallucinations are strictly forbidden. Focus on artifacts left by the forgery process (e.g., 3D model tracking, re-rendering, expression transfer), not natural facial features (e.g., makeup, appearance). Your output must strictly follow the "Output Format", listing manipulated regions first, then analyzing the artifacts one by one.
--- user ---
Task Definition: You will receive two images: the first is a [Manipulated Image] generated using Face2Face technology, and the second is the corresponding [Original Image]. Carefully compare the two images to locate manipulated regions, then explain the forgery artifacts using the "Face2Face Potential Forgery Artifacts Reference Guide". Focus solely on artifacts caused by Face2Face technology, not natural expression differences.

Core Analysis Principles:
1. Identify all differences to locate manipulated areas, including facial features, hair, and skin tone. Pay special attention to the lips and surrounding areas.
2. Distinguish between:
   - Analyze This - Forgery Artifacts: Technical anomalies (3D re-rendering, Blendshape parameterized driving, 3D tracking errors).
     Correct Example: 'Plastic-like' skin, expression structural distortion ('puppet-like'), misalignment at facial edges, unrealistic lighting/highlights.
   - Ignore This - Natural Features: Expression changes themselves are not artifacts.
     Incorrect Example: Different expressions (smiling vs laughing), mouth open, [Manipulated Image] laughing while [Original Image] is smiling.
3. Base your analysis on the technical flaws outlined in the Reference Guide; attribute observed phenomena to the correct cause.
4. Note: Face2Face preserves identity; focus on expression manipulation artifacts, not identity differences.

Face2Face Potential Forgery Artifacts Reference Guide:
1. 3D Model Render/Blend Borders
   - Cause: Re-rendered facial regions pasted onto the original frame.
   - Manifestation: Facial edge mismatch, background/hair distortion adjacent to the face.
2. Texture Mismatch Due to Re-rendering
   - Cause: 3D model cannot perfectly replicate original camera imaging details or skin textures.
   - Manifestation: 'Plastic-like' skin, unrealistic lighting/highlights.
3. Local Artifact: Mouth Detail Blurring
   - Cause: Difficulty preserving fine lip textures during expression manipulation.
   - Manifestation: Loss of lip texture, blurry lip borders, stiff lip shape.
4. Expression Structural Distortion ("Puppet-like" Artifacts)
   - Cause: Parameterized Blendshape coefficients limit realistic muscle coordination.
   - Manifestation: Non-ergonomic stretching, stiff/mechanical expressions, lack of natural coordination between mouth and eyes.

Output Format:
First list manipulated regions, then describe corresponding forgery artifacts.
Reference Example:
Manipulated Regions: Facial Contour, Mouth
Forgery Artifacts: [Facial Contour]: Blending artifacts at the contour. [Mouth]: Smile shape stiff and unnatural; corners stretch mechanically.

Here are [Manipulated Image] and the [Original Image].
[Manipulated Image]: {{manipulated_image_path}}
[Original Image]: {{original_image_path}}
)vragtmpl"},
    EmbeddedAsset{"annotation_faceswap", R"vragtmpl(--- system ---
You are an expert in face tampering detection. Your task is to strictly compare the [Manipulated Image] and the [Original Image], first precisely locate the manipulated regions, and then explain how the forgery artifacts within those regions were caused by the improper processing of FaceSwap technology. You must strictly adhere to the "Based on Comparison, Loyal to Evidence" principle. Hallucinations are strictly forbidden. Your analysis of the manipulated regions must focus on the artifacts left by the forgery process (e.g., blending, alignment), not the natural features of the face (e.g., makeup, appearance). Your output must strictly follow the "Output Format" specified by the user, listing the manipulated regions first, then analyzing the artifacts one by one.
--- user ---
Task Definition: You will receive two images, the first is a [Manipulated Image] generated using FaceSwap technology, and the second is the corresponding [Original Image]. Please act as an expert in face tampering detection. By carefully comparing the two images, first find the manipulated regions in the [Manipulated Image], and then explain the forgery artifacts in those regions. You must first locate the manipulated regions by careful comparison, and then use the "FaceSwap Potential Forgery Artifacts Reference Guide" to explain how the artifacts you found were caused by FaceSwap processing. Focus on the artifacts caused by FaceSwap, not natural facial differences.

Core Analysis Principles:
1. Carefully compare each facial feature, hair, skin, etc., to locate manipulated regions without omissions or hallucinations.
2. Distinguish clearly between:
   - Analyze This - Forgery Artifacts: Visual anomalies directly caused by technical flaws (e.g., blending, alignment, 3D fitting).
     Correct Example: Inconsistent skin tone, feature overlap, blurry edges, structural distortion.
   - Ignore This - Natural Features: Inherent facial features unrelated to forgery.
     Incorrect Example: Makeup, moles, dimples, natural face shape or expression.
3. Attribute observed phenomena (e.g., "two eyebrows") to technical flaws (e.g., "feature overlap caused by keypoint mismatch").

FaceSwap Potential Forgery Artifacts Reference Guide:
1. Color & Lighting Inconsistency
   - Inconsistent Skin Tone: Skin hue, saturation, or brightness differs from surrounding regions.
   - Incorrect Lighting/Shadows: Face highlights/shadows inconsistent with environment.
2. Feature Misalignment
   - Facial Structure Abnormality: Misaligned facial features due to sparse keypoint fitting.
   - Feature Overlap: Overlapping features from both faces (e.g., eyebrows).
3. Blending Artifacts
   - Unnatural Blurring: Intentional blur to hide splicing lines.
   - Edge Overlap/Gaps: Misalignment with head contour causing gaps or overlaps.
   - Hard Edges: Clear cutting sensation from poor blending.
4. Mask-like Feel
   - Detail Loss: Overly smooth/blurry skin creating a mask-like appearance.

Output Format:
First list the manipulated regions, then describe the corresponding forgery artifacts.
Reference Example:
Manipulated Regions: Eyebrows, Skin
Forgery Artifacts: [Eyebrows]: Ghosting due to feature overlap. [Skin]: Cheek tone mismatch exposing blending defect.

Here are [Manipulated Image] and the [Original Image]:
[Manipulated Image]: {{manipulated_image_path}}
[Original Image]: {{original_image_path}}
)vragtmpl"},
    EmbeddedAsset{"annotation_neuraltextures", R"vragtmpl(--- system ---
You are an expert in face tampering detection. Your task is to strictly compare the [Manipulated Image] and the [Original Image], first precisely locate the manipulated region (entire face), and then explain how the forgery artifacts were caused by the NeuralTextures GAN-based full-face re-rendering process. You must strictly adhere to the "Based on Comparison, Loyal to Evidence" principle. Hallucinations are strictly forbidden. Focus on artifacts left by the forgery process (e.g., loss of high-frequency details), not natural facial features. Your output must strictly follow the "Output Format", listing manipulated regions first, then analyzing the artifacts one by one.
--- user ---
Task Definition: You will receive two images: the first is a [Manipulated Image] generated using NeuralTextures technology, and the second is the corresponding [Original Image]. Carefully compare the two images to locate manipulated regions (full face) and explain the forgery artifacts using the "NeuralTextures Potential Forgery Artifacts Reference Guide". Focus solely on artifacts caused by NeuralTextures technology.

Core Analysis Principles:
1. Identify all differences across the full face, including skin texture, wrinkles, smile lines, and lips. Pay special attention to the lips and surrounding areas.
2. Distinguish between:
   - Analyze This - Forgery Artifacts: Pixel-level anomalies caused by GAN re-rendering.
     Correct Example: "Airbrushed" feel, loss of high-frequency details (pores, wrinkles, smile lines), loss of lip texture, blurry lip borders.
   - Ignore This - Semantic Changes/Natural Features: Expression changes are not artifacts.
     Incorrect Example: Open mouth, smiling vs laughing.
3. Attribute observed phenomena to technical flaws according to the Reference Guide.
4. Note: NeuralTextures preserves identity; focus on expression and full-face re-rendering artifacts.

NeuralTextures Potential Forgery Artifacts Reference Guide:
1. Core Artifact: Global High-Frequency Detail Loss
   - Cause: GAN/U-Net reconstruction of the entire face smooths out high-frequency details.
   - Manifestation:
     - "Airbrushed" feel across the entire face (forehead, cheeks, nose).
     - Loss of skin texture, pores, smile lines, crow's feet; details are faded or missing.
2. Local Artifact: Mouth Detail Blurring
   - Cause: GAN may struggle to preserve fine lip textures.
   - Manifestation: Loss of lip texture, blurry lip borders, stiff or flat lip shape.

Output Format:
First list manipulated regions, then describe corresponding forgery artifacts.
Reference Example:
Manipulated Regions: Facial Skin, Lips
Forgery Artifacts: [Facial Skin]: Entire face looks abnormally smooth, "airbrushed", lacks pores and texture. [Lips]: Lip surface abnormally smooth, missing lip texture.

Here are [Manipulated Image] and the [Original Image].
[Manipulated Image]: {{manipulated_image_path}}
[Original Image]: {{original_image_path}}
)vragtmpl"},
    EmbeddedAsset{"annotation_real", R"vragtmpl(--- system ---
You are an expert in face tampering detection. Your task is to strictly analyze the [Real Image] and "provide evidence" of its authenticity. You must accomplish this task by selectively confirming that the image possesses "Indicators of Authenticity" (e.g., normal facial structure) and lacks "Forgery Artifacts" (e.g., no splicing lines on the face). Your analysis must be based on facts: if a real, low-resolution image is blurry, you must not label "clear pores," but should instead focus on analyzing other indicators like "lighting consistency" or "facial structure". Your output must strictly follow the "Output Format" specified by the user.
--- user ---
Task Definition:
You will receive a [Real Image]. Please act as an expert in face tampering detection to analyze and explain why this image is real. Your goal is to teach a downstream model to recognize Indicators of Authenticity. Hallucinations are strictly forbidden during this process. If you do not see obvious real features, you should check if other real features exist and must not fabricate them.

Core Analysis Principles (Important):
1. Selective Annotation (Key Principle): The "Indicators of Authenticity Reference Guide" is a "checklist," not a "requirement".
   - You must select only those features from the guide that are clearly and distinctly visible in this [Real Image].
   - No Hallucinations: If a real, low-resolution photo causes "skin texture" to be blurry, you must not select [Skin Texture]. Skip it and analyze reliable indicators like [Skin Tone Consistency] or [Facial Structure].
2. Analysis Order (From Easy to Hard):
   - First (Check Face Swap): Ensure obvious artifacts (feature structure, contour edges, skin tone) are absent.
   - Second (Check Reenactment): Ensure subtle artifacts (skin texture, lip texture/shape) are absent.
3. Core Difference (Consistency): Forgery = Inconsistent; Real = Consistent. Your analysis should reflect this consistency.

Indicators of Authenticity Reference Guide:
(Select and analyze only clearly observable features)
1. Structure & Contour (vs. FaceSwap/DeepFakes flaws)
   - Normal Facial Structure: Features do not show misalignment, distortion, or overlap.
   - Natural Contour Transitions: Smooth transitions to neck/hair; no splicing artifacts, hard edges, or unnatural blurring.
2. Lighting & Color (vs. FaceSwap/DeepFakes flaws)
   - Consistent Skin Tone/Lighting: Base skin tone and lighting direction are consistent across face/neck. No color patches.
   - Natural Shadows/Highlights: Physically plausible shape and softness of shadows/highlights.
3. Geometric Shape (vs. Face2Face/NT flaws)
   - Natural Lip Shape: Lips have curvature; lacks stiff, over-smoothed, or puppet-like feel.
   - Coordinated Facial Muscles: Muscle movements (e.g., smile lines) follow anatomical logic.
4. High-Frequency Details (Depends on image clarity)
   - Consistent Skin Texture: (Clear Image) Pores/wrinkles visible and uniform. (Blurry Image) Blur level is consistent with background.
   - Clear Lip Texture: (Clear Image) Visible texture and natural sheen; clear borders.
   - Hair/Teeth Details: (Clear Image) Sharp strands of hair and teeth texture.

Output Format:
Reference Example 1: High-Quality Image
Indicators of Authenticity:
[Skin Texture Details]: The skin texture on the cheeks and forehead is clear and consistent with the neck texture; under-eye bags are visible.
[Lip Texture]: The lip texture is clear and natural, with a natural sheen.
[Lighting Consistency]: The lighting direction on the face and neck is consistent, with no local anomalies.

Reference Example 2: Low-Quality/Blurry Image
Indicators of Authenticity:
[Facial Structure]: The facial features conform to anatomical structure, with no misalignment or overlap.
[Contour Transitions]: Although the image is blurry, the transition from the facial contour to the background is still natural, with no splicing lines.
[Lip Shape]: The lip shape is natural and not stiff; the shadow under the lower lip is natural.

Here are the [Real Image].
[Real Image]: {{real_image_path}}
)vragtmpl"},
    EmbeddedAsset{"cot_cross_verification", R"vragtmpl(--- system ---
Task Definition:
You are a world-class face tampering detection analyst and an expert in logical reasoning. Your task is to "role-play" and generate a Cross-Validation Chain-of-Thought to create fine-tuning data. You will receive:
1. Query_Image (Primary Evidence)
2. RAG_Context (Secondary Evidence: 5 retrieved reference annotations + similarity scores, possibly noisy)
3. Ground_Truth_Label

Your reasoning must follow three steps:

1. Preliminary Visual Analysis:
   - Analyze the Query_Image in detail.
   - Describe only the visual facts that indicate support for the Ground_Truth_Label (e.g., "skin color on the face is uniform", "an unnatural blur at the mouth's edge").
   - Do not mention or assume the Ground Truth. Only report visual evidence.
2. RAG Reference Information Analysis:
   - Objectively report the 5 pieces of retrieved information.
   - Identify:
     - Supporting Evidence (consistent with Step 1): e.g., ("Real: clear skin texture", 0.70)
     - Opposing Evidence (contradicts Step 1): e.g., ("Fake: mouth artifact", 0.85)
   - Provide an objective analysis of the RAG context, noting both support and noise.
3. Fusion, Reasoning, and Decision:
   - Cross-verify visual facts from Step 1 against RAG evidence:
     1. Verify Opposing Evidence: If RAG's Fake evidence cannot be confirmed visually, treat it as retrieval noise and discard it.
     2. Verify Supporting Evidence: If RAG's Real evidence can be confirmed visually, accept it as valid.
   - Conclude by integrating Step 1 and Step 2:
     - Visual analysis supports the Ground Truth.
     - Supporting RAG evidence reinforces the conclusion.
     - Opposing RAG evidence is discarded as noise.

Output Format:

<Preliminary Visual Analysis>:
[Analyze the Query_Image in detail. Only describe visual facts that lead to the Ground_Truth_Label.]
</Preliminary Visual Analysis>

<RAG Reference Information Analysis>:
["The retrieval report provides the following information:
Supporting Evidence: [Cite 1-2 highest-scoring pieces consistent with Step 1]
Opposing Evidence: [Cite 1-2 highest-scoring pieces contradicting Step 1]
Analysis: Objectively evaluate the RAG context."]
</RAG Reference Information Analysis>

<Fusion, Reasoning, and Decision>:
[Step 1 visual facts + cross-verification with Step 2:
1. Verify Opposing Evidence -> discard if inconsistent
2. Verify Supporting Evidence -> confirm if consistent
3. Conclusion: combine visual facts and valid RAG evidence to form final judgment.]
</Fusion, Reasoning, and Decision>

<Answer> Ground_Truth_Label </Answer>
--- user ---
Query_Image: {{image_ref}}
RAG_Context:
{{evidence_block}}
Ground_Truth_Label: {{ground_truth}}
)vragtmpl"},
    EmbeddedAsset{"cot_evidence_guided_correction", R"vragtmpl(--- system ---
You are a world-class face tampering detection analyst and an expert in logical reasoning. Your task is to "role-play" and generate a Cross-Validation Chain-of-Thought to create fine-tuning data. You will receive:
1. Query_Image (Primary Evidence)
2. RAG_Context (Secondary Evidence: 5 retrieved reference annotations + similarity scores)
3. Ground_Truth_Label

You must act as a perfect student model that initially misjudges the image but allows the RAG report to correct its intuition. Your reasoning must follow three steps:

1. Visual Analysis (Admit Confusion): Analyze the Query_Image in detail. Pretend to be misled by confusing features and form a wrong initial impression. Do not mention the Ground_Truth_Label.
2. RAG Analysis (Highlight Golden Evidence): Inspect the RAG_Context. Identify the "Golden Evidence" consistent with the Ground_Truth_Label (e.g., high-score > 0.8, dominant quantity). Only report RAG contents without making a conclusion.
3. Fusion and Decision (The "Aha!" Moment): Cross-verify RAG evidence and correct the initial visual intuition. Steps:
   1. Re-examination: Re-inspect the Query_Image prompted by Golden Evidence.
   2. Verification (Aha! Moment): Describe subtle artifacts now visible due to RAG guidance.
   3. Conclusion: Declare the final judgment after RAG-guided re-evaluation.

Output Format:

<Preliminary Visual Analysis>:
Describe the confusing visual features that may lead to a wrong initial judgment. E.g., "I (the student) observe that the overall lighting of the Query_Image seems consistent, and no obvious artifacts are immediately visible to the naked eye. At first glance, it seems to be a [Wrong Label]."
</Preliminary Visual Analysis>

<RAG Reference Information Analysis>
"However, the RAG report provides high-confidence 'Golden Evidence' that contradicts my initial impression:
1. Golden Evidence (Corrective): [Cite the 1-2 highest-scoring pieces of evidence consistent with the GT, e.g., ("Fake: subtle mouth artifact", 0.91)]
2. Majority Consensus: [Point out quantity distribution, e.g., "Among the 5 retrieved pieces, 4 consistently point to [GT Label]"]
3. Analysis: [Objectively evaluate RAG, e.g., "High-score evidence + majority consensus strongly suggest my initial judgment may be wrong."]"
</RAG Reference Information Analysis>:

<Fusion, Reasoning, and Decision>:
Describe how you cross-verify RAG evidence and correct your initial visual intuition:
1. Re-examination: Re-inspect the specific areas indicated by RAG.
2. Verification (Aha! Moment): Confirm subtle artifacts missed initially.
3. Conclusion: State that initial intuition was wrong and RAG evidence successfully corrected it.
</Fusion, Reasoning, and Decision>

<Answer> Ground_Truth_Label </Answer>
--- user ---
Query_Image: {{image_ref}}
RAG_Context:
{{evidence_block}}
Ground_Truth_Label: {{ground_truth}}
)vragtmpl"},
    EmbeddedAsset{"cot_resilient_rejection", R"vragtmpl(--- system ---
You are a world-class face tampering detection analyst and an expert in critical thinking. Your task is to "role-play" and generate a Resilient Rejection Chain-of-Thought. You will receive:
1. Query_Image (Primary Evidence)
2. RAG_Context (Secondary Evidence: 5 retrieved reference annotations, which may be misleading or noisy)
3. Ground_Truth_Label

You must act as a rigorous expert who rejects misleading external evidence. Even if the RAG report has high similarity scores, if it contradicts the visual facts of the Query_Image, you must identify it as "Noise" and discard it. Your reasoning must follow three steps:

1. Visual Analysis (Independent Judgment): Analyze the Query_Image thoroughly based on your internal forensic knowledge. Form an initial hypothesis based strictly on visual cues (e.g., skin texture, lighting consistency).
2. RAG Analysis (Critical Scrutiny): Inspect the RAG_Context. Identify evidence that conflicts with your visual analysis or contains hallucinations (e.g., RAG claims "blurry mouth" but the image is sharp).
3. Fusion and Decision (The "Rejection" Moment): Explicitly resolve the conflict by rejecting the noise.
   1. Conflict Detection: State clearly that RAG evidence contradicts visual facts.
   2. Falsification: Explain why the RAG evidence is invalid (e.g., "The retrieved case is a FaceSwap, but the query image has no blending artifacts").
   3. Final Verdict: Discard the RAG evidence and stick to your internal visual judgment.

Output Format:

<Preliminary Visual Analysis>:
Describe your independent visual observation. E.g., "I observe high-frequency details in the iris and natural skin texture, suggesting the image is likely [Real/Fake]."
</Preliminary Visual Analysis>

<RAG Reference Information Analysis>:
"The RAG report provides the following evidence, but it appears suspicious:"
1. Conflicting Evidence: [Cite high-scoring evidence that is factually wrong for this image]
2. Analysis: [Note the discrepancy, e.g., "Although the retriever gives a 0.85 score, the described artifacts are NOT present in the query image."]
</RAG Reference Information Analysis>

<Fusion, Reasoning, and Decision>:
Perform the rejection reasoning:
1. Conflict: "RAG suggests [Wrong Label] based on [Artifact], but my visual analysis shows [Visual Fact]."
2. Rejection: "The retrieval is likely due to semantic similarity (e.g., similar pose) rather than forensic similarity. The evidence is a False Positive."
3. Conclusion: "I reject the misleading RAG evidence and trust my internal visual analysis."
</Fusion, Reasoning, and Decision>

<Answer> Ground_Truth_Label </Answer>
--- user ---
Query_Image: {{image_ref}}
RAG_Context:
{{evidence_block}}
Ground_Truth_Label: {{ground_truth}}
)vragtmpl"},
    EmbeddedAsset{"inference", R"vragtmpl(--- system ---
You are a face forgery analyst. You receive a face image and a list of reference cases retrieved from a forensic knowledge base. Each reference is written as ("<Label>: <annotated findings>", <similarity>). References can be wrong; weigh them against what you see in the image.

Respond with exactly four tagged sections in this order and nothing else:

<Preliminary Visual Analysis>
Your own observations of the image before reading the references. End this section with one line of the form "Initial Judgment: Real" or "Initial Judgment: Fake".
</Preliminary Visual Analysis>
<RAG Reference Information Analysis>
Which references support your initial judgment, which contradict it, and how reliable each one looks.
</RAG Reference Information Analysis>
<Fusion, Reasoning, and Decision>
Re-check the image against the references, resolve any conflict, and state the decision.
</Fusion, Reasoning, and Decision>
<Answer> Real or Fake </Answer>
--- user ---
Query image: {{image_ref}}
Retrieved references:
{{evidence_block}}
)vragtmpl"},
    EmbeddedAsset{"judge_rubric", R"vragtmpl(--- system ---
You grade explanations written by a face forgery detector. Score the explanation on three dimensions, each an integer from 0 to 3:

accuracy: 3 = the verdict matches the ground truth and every cited artifact or authenticity cue is visible in the image; 2 = correct verdict with minor factual slips; 1 = correct verdict with mostly unsupported reasoning; 0 = wrong verdict or no usable reasoning.
faithfulness: 3 = every statement is grounded in the image; 2 = one unsupported claim; 1 = several unsupported claims; 0 = largely hallucinated.
professionalism: 3 = precise forensic vocabulary tied to concrete regions; 2 = mostly precise; 1 = vague or generic; 0 = not a forensic analysis.

Reply with exactly three lines and nothing else:
accuracy: <0-3>
faithfulness: <0-3>
professionalism: <0-3>
--- user ---
Image: {{image_ref}}
Ground truth: {{ground_truth}}
Explanation to grade:
{{explanation}}
)vragtmpl"},
    EmbeddedAsset{"stage1_vqa_question", R"vragtmpl(--- user ---
Is the face in this image real or fake? Answer with one word: Real or Fake.
)vragtmpl"},
};
}  // namespace

std::span<const EmbeddedAsset> embedded_templates() { return kAssets; }

}  // namespace vrag::prompt::detail
