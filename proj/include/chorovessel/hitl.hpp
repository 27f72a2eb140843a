#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "chorovessel/presegment.hpp"
#include "chorovessel/raster.hpp"

namespace chorovessel {

enum class EditTool { Add, Erase };

struct EditEvent {
    std::int64_t seq = 0;
    std::int64_t t_ms = 0;  // client clock
    EditTool tool = EditTool::Add;
    int radius_px = 1;
    std::vector<std::array<int, 2>> path;  // (x, y)

    bool operator==(const EditEvent&) const = default;
};

/// Checks radius, path and bounds, and that seq strictly increases starting
/// above `after_seq`.
void validate_events(const std::vector<EditEvent>& events, int width, int height,
                     std::int64_t after_seq = INT64_MIN);

/// Pixels whose center lies strictly closer than radius_px to the stroke
/// polyline. Integer arithmetic only, so replay is bit-identical everywhere.
void stamp_stroke(Mask& mask, const EditEvent& ev);

/// Replays the log in order; add paints 1, erase paints 0.
Mask apply_events(const Mask& proposal, const std::vector<EditEvent>& events);

/// Sum of gaps between consecutive events, each capped at idle_cutoff_ms.
std::int64_t active_ms(const std::vector<EditEvent>& events, std::int64_t idle_cutoff_ms = 30000);

/// One radius-1 horizontal stroke per maximal run of pixels that must change,
/// which replays `from` into `to` exactly. Timestamps start at t0_ms and advance
/// by gap_ms.
std::vector<EditEvent> diff_to_events(const Mask& from, const Mask& to, std::int64_t first_seq, std::int64_t t0_ms,
                                      std::int64_t gap_ms);

std::string events_to_json(const std::vector<EditEvent>& events);
std::vector<EditEvent> events_from_json(const std::string& text);

enum class ImageStatus { Proposed, InProgress, Corrected };
const char* status_name(ImageStatus s);

struct ImageRecord {
    std::string id;
    std::string cohort;
    std::string view = "standard";  // or "ultrawide"
    bool has_truth = false;

    bool operator==(const ImageRecord&) const = default;
};

struct RoundImage {
    std::string id;
    ImageStatus status = ImageStatus::Proposed;
    std::int64_t revision = 0;
    std::vector<EditEvent> events;
    // set on submit
    std::int64_t client_active_ms = 0;
    std::int64_t server_active_ms = 0;
    std::int64_t pixels_changed = 0;
    double dice = 0.0;  // proposal vs correction

    bool operator==(const RoundImage&) const = default;
};

struct RoundReport {
    double mean_dice_proposal_vs_corrected = 0.0;
    double mean_active_seconds = 0.0;
    double mean_pixels_changed = 0.0;
    bool converged = false;
    std::optional<VesselnessParams> fitted;  // absent when the backend is external
    double fit_mean_dice = 0.0;
    int training_images = 0;

    bool operator==(const RoundReport&) const = default;
};

struct RoundState {
    int number = 0;
    SegmenterBackend backend;  // what produced this round's proposals
    std::vector<RoundImage> images;
    std::optional<RoundReport> report;

    const RoundImage* find(const std::string& id) const;
    bool operator==(const RoundState&) const = default;
};

struct HitlConfig {
    double stop_dice = 0.95;
    std::int64_t idle_cutoff_ms = 30000;
    int threads = 1;

    bool operator==(const HitlConfig&) const = default;
};

struct ProjectState {
    std::string id;
    HitlConfig config;
    SegmenterBackend backend = VesselnessParams{};
    std::vector<ImageRecord> images;
    std::vector<RoundState> rounds;

    const ImageRecord* image(const std::string& id) const;
    /// Round holding the image, or nullptr when unassigned.
    const RoundState* round_of(const std::string& image_id) const;
    const RoundState* round(int number) const;

    bool operator==(const ProjectState&) const = default;
};

std::string project_state_to_json(const ProjectState& state);  // project.json body, without events
std::string round_to_json(const RoundState& round);
std::string report_to_json(const RoundReport& report, int round_number);

std::string backend_to_json(const SegmenterBackend& backend);
SegmenterBackend backend_from_json(const std::string& text);

/// On-disk project: project.json, images/<id>.png, truth/<id>.png,
/// rounds/<n>/{proposals,corrections,events}/<id>.*, rounds/<n>/report.json.
/// Every mutation writes its payload files first and commits by atomically
/// replacing project.json, so a reload always sees the last completed operation.
/// Mutations are serialized; snapshot() hands out immutable state for readers.
class Project {
public:
    static std::unique_ptr<Project> create(const std::filesystem::path& dir, const std::string& id,
                                           const SegmenterBackend& backend = VesselnessParams{},
                                           const HitlConfig& config = {});
    static std::unique_ptr<Project> open(const std::filesystem::path& dir);

    Project(const Project&) = delete;
    Project& operator=(const Project&) = delete;

    const std::filesystem::path& dir() const { return dir_; }
    std::shared_ptr<const ProjectState> snapshot() const;

    void add_image(const std::string& id, const GrayImage& image, const std::string& cohort = "",
                   const std::string& view = "standard", const Mask* truth = nullptr);
    RoundState start_round(const std::vector<std::string>& image_ids);
    /// Returns the new revision. Stale expected_revision -> Conflict.
    std::int64_t append_events(const std::string& image_id, const std::vector<EditEvent>& events,
                               std::int64_t expected_revision);
    /// Replays the stored log over the proposal and requires it to equal final_mask.
    RoundImage submit_correction(const std::string& image_id, const Mask& final_mask, std::int64_t client_active_ms,
                                 std::int64_t expected_revision);
    RoundReport finalize_round(int number);
    /// Corrections for every uncorrected image of the open round: each pixel where
    /// proposal and truth disagree takes the truth value with probability fidelity.
    void simulate_annotator(double fidelity, std::uint64_t seed);

    GrayImage image(const std::string& id) const;
    Mask proposal(const std::string& id) const;
    Mask correction(const std::string& id) const;
    Mask truth(const std::string& id) const;

private:
    Project(std::filesystem::path dir, ProjectState state);
    void commit(ProjectState next);
    RoundState& open_round(ProjectState& s, const std::string& image_id) const;
    std::filesystem::path round_dir(int number) const;

    std::filesystem::path dir_;
    std::mutex write_mu_;
    mutable std::mutex snap_mu_;
    std::shared_ptr<const ProjectState> state_;
};

struct LoopSimSpec {
    int rounds = 3;
    int images_per_round = 6;
    int size = 256;
    double fidelity = 1.0;
    std::uint64_t seed = 42;
    int threads = 1;
};

struct LoopSimResult {
    std::vector<RoundReport> reports;
    bool dice_non_decreasing = true;
    bool effort_strictly_decreasing = true;

    std::string to_json() const;
};

/// Fresh project in `dir` (must not hold one), synthetic scenes with truth,
/// oracle annotator, finalize after each round.
LoopSimResult run_loop_sim(const LoopSimSpec& spec, const std::filesystem::path& dir);

}  // namespace chorovessel
