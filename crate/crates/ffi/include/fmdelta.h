#ifndef FMDELTA_H
#define FMDELTA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FmdStatus {
  FMD_STATUS_OK = 0,
  // A required pointer argument was null.
  FMD_STATUS_NULL_ARGUMENT = 1,
  // An argument is outside its domain (word size, interval, count...).
  FMD_STATUS_INVALID_ARGUMENT = 2,
  // Index outside the valid range.
  FMD_STATUS_OUT_OF_RANGE = 3,
  // Malformed or corrupt input data.
  FMD_STATUS_CORRUPT = 4,
  // Arena capacity or engine cache exceeded.
  FMD_STATUS_CAPACITY = 5,
  // Output buffer too small; the required size was stored.
  FMD_STATUS_BUFFER_TOO_SMALL = 6,
  // The arena is in the middle of a sweep.
  FMD_STATUS_BUSY = 7,
  // An update request no longer matches the arena contents.
  FMD_STATUS_STALE = 8,
  // Internal failure.
  FMD_STATUS_INTERNAL = 9,
} FmdStatus;

// Dataset arrangement for `fmd_packets_generate`.
typedef enum FmdMode {
  FMD_MODE_ORDERED = 0,
  FMD_MODE_RANDOM = 1,
} FmdMode;

// Simulated packet store.
typedef struct FmdArena FmdArena;

// Ordered list of packets.
typedef struct FmdPacketList FmdPacketList;

// Compressed packet stream.
typedef struct FmdStream FmdStream;

// Called once per emitted packet with its 1-based index. `data` is valid
// only for the duration of the call.
typedef void (*FmdTransmitFn)(void *user, size_t index, const uint8_t *data, size_t len);

// Outcome of one engine sweep.
typedef struct FmdSweepReport {
  size_t count;
  size_t bytes_read;
  size_t bytes_written;
  size_t updates_applied;
  size_t peak_cache_bytes;
} FmdSweepReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *fmd_last_error(void);

enum FmdStatus fmd_packets_new(struct FmdPacketList **list);

// Appends a copy of `len` bytes (1..=9216).
enum FmdStatus fmd_packets_push(struct FmdPacketList *list, const uint8_t *data, size_t len);

enum FmdStatus fmd_packets_len(const struct FmdPacketList *list, size_t *len);

// Borrows packet `index` (0-based). The pointer is valid until the list is
// modified or freed.
enum FmdStatus fmd_packets_get(const struct FmdPacketList *list,
                               size_t index,
                               const uint8_t **data,
                               size_t *len);

// Synthetic CCM/BFD dataset; `count` must be even and at least 2, `mode`
// one of the `FmdMode` values.
enum FmdStatus fmd_packets_generate(size_t count,
                                    uint64_t seed,
                                    uint32_t mode,
                                    struct FmdPacketList **list);

void fmd_packets_free(struct FmdPacketList *list);

// Compresses a packet list. `entry_interval` 0 means a single entry point.
enum FmdStatus fmd_compress(const struct FmdPacketList *list,
                            size_t word_size,
                            uint32_t entry_interval,
                            struct FmdStream **stream);

enum FmdStatus fmd_decompress(const struct FmdStream *stream, struct FmdPacketList **list);

// Total size of the stream's records, headers included.
enum FmdStatus fmd_stream_compressed_size(const struct FmdStream *stream, size_t *size);

// Serializes to the `FMD1` format. The required size is always stored in
// `written`; if it exceeds `cap` nothing is copied and the call fails with
// the buffer-too-small status.
enum FmdStatus fmd_stream_serialize(const struct FmdStream *stream,
                                    uint8_t *buf,
                                    size_t cap,
                                    size_t *written);

enum FmdStatus fmd_stream_parse(const uint8_t *data, size_t len, struct FmdStream **stream);

void fmd_stream_free(struct FmdStream *stream);

enum FmdStatus fmd_arena_load(const struct FmdPacketList *list,
                              size_t word_size,
                              uint32_t entry_interval,
                              size_t capacity,
                              struct FmdArena **arena);

// Restores an `FMA1` snapshot.
enum FmdStatus fmd_arena_restore(const uint8_t *data, size_t len, struct FmdArena **arena);

// Serializes to the `FMA1` snapshot format (see `fmd_stream_serialize` for
// the buffer protocol).
enum FmdStatus fmd_arena_snapshot(const struct FmdArena *arena,
                                  uint8_t *buf,
                                  size_t cap,
                                  size_t *written);

enum FmdStatus fmd_arena_count(const struct FmdArena *arena, size_t *count);

enum FmdStatus fmd_arena_used_bytes(const struct FmdArena *arena, size_t *used);

// Runs one sweep, emitting every packet through `cb` (may be null).
// `report` may be null.
enum FmdStatus fmd_arena_sweep(const struct FmdArena *arena,
                               FmdTransmitFn cb,
                               void *user,
                               struct FmdSweepReport *report);

// Removes packet `k` (1-based) in one update sweep.
enum FmdStatus fmd_arena_remove(const struct FmdArena *arena,
                                size_t k,
                                FmdTransmitFn cb,
                                void *user,
                                struct FmdSweepReport *report);

// Inserts a packet so that it becomes packet `k` (1-based), in one update
// sweep.
enum FmdStatus fmd_arena_insert(const struct FmdArena *arena,
                                size_t k,
                                const uint8_t *data,
                                size_t len,
                                FmdTransmitFn cb,
                                void *user,
                                struct FmdSweepReport *report);

// Copies packet `k` (1-based) into `buf` and stores the number of record
// reads it took in `reads` (may be null).
enum FmdStatus fmd_arena_access(const struct FmdArena *arena,
                                size_t k,
                                uint8_t *buf,
                                size_t cap,
                                size_t *written,
                                size_t *reads);

void fmd_arena_free(struct FmdArena *arena);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FMDELTA_H */
