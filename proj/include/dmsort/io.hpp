#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dmsort/association.hpp"
#include "dmsort/geometry.hpp"

namespace dmsort {

/// One MOTChallenge row. Frames are 0-based in memory, 1-based on disk.
struct MotRecord {
    int frame = 0;
    int id = -1;
    BoundingBox box;

    bool operator==(const MotRecord&) const = default;
};

using FrameDetections = std::map<int, std::vector<BoundingBox>>;

/// `frame,id,x,y,w,h,conf[,...]` rows; at least 7 columns, extras ignored.
/// Throws std::runtime_error with the line number on malformed rows,
/// non-finite fields or non-positive sizes.
std::vector<MotRecord> read_mot(const std::filesystem::path& path);

/// Groups detection rows by frame, keeping in-file order.
FrameDetections read_detections(const std::filesystem::path& path);

/// Ground truth rows; rows whose 7th column is 0 (ignore flag) are dropped.
std::vector<MotRecord> read_ground_truth(const std::filesystem::path& path);

/// Rows sorted by frame then id; coordinates in fixed 2-decimal form.
std::string format_results(std::vector<MotRecord> records);
void write_results(const std::filesystem::path& path, const std::vector<MotRecord>& records);

/// Clips boxes to [0, width] x [0, height]; records left without area are dropped.
std::vector<MotRecord> clip_to_image(std::vector<MotRecord> records, double width, double height);

/// Detection rows (id -1) in input order.
void write_detections(const std::filesystem::path& path, const std::vector<MotRecord>& records);

/// Embeddings keyed by (0-based frame, detection ordinal within the frame).
using EmbeddingTable = std::map<std::pair<int, int>, Embedding>;

/// Binary container: "DMEB", u32 version, u32 dim, u64 count, then per
/// record i32 frame (1-based), i32 ordinal, dim x f32. Vectors are
/// normalized at load.
EmbeddingTable read_embeddings(const std::filesystem::path& path);
void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);

/// Text fallback: `frame,ordinal,v0,v1,...` per line.
EmbeddingTable read_embeddings_csv(const std::filesystem::path& path);

/// `frame,a,b,c,d,e,f` per line, mapping frame-1 coordinates into frame
/// coordinates. Frames without a row are the identity.
class CmcTable {
public:
    const AffineTransform& at(int frame) const;
    void set(int frame, const AffineTransform& a) { rows_[frame] = a; }
    const std::map<int, AffineTransform>& rows() const { return rows_; }

private:
    std::map<int, AffineTransform> rows_;
};

CmcTable read_cmc(const std::filesystem::path& path);
void write_cmc(const std::filesystem::path& path, const CmcTable& table);

struct SeqInfo {
    std::string name;
    int image_width = 0;
    int image_height = 0;
    int length = 0;
};

/// `[Sequence]` ini with name, imWidth, imHeight, seqLength.
std::optional<SeqInfo> read_seqinfo(const std::filesystem::path& path);
void write_seqinfo(const std::filesystem::path& path, const SeqInfo& info);

}  // namespace dmsort
