#pragma once

#include <istream>
#include <ostream>
#include <string>

#include "erank/corpus.hpp"
#include "erank/index.hpp"

namespace erank {

/// Everything the online path needs: vocabulary, destination table and counts.
struct IndexSnapshot {
    ActivityVocabulary vocabulary;
    DestinationTable destinations;
    EndorsementIndex index;
};

/// Canonical JSON text; a load followed by a write reproduces the bytes exactly.
std::string write_snapshot(const IndexSnapshot& snapshot);
void write_snapshot(const IndexSnapshot& snapshot, std::ostream& out);

/// Throws IngestError on malformed or inconsistent documents.
IndexSnapshot read_snapshot(std::istream& in);
IndexSnapshot read_snapshot_file(const std::string& path);

}  // namespace erank
