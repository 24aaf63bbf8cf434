#ifndef HTR_H
#define HTR_H

#include <stddef.h>
#include <stdint.h>

typedef enum HtrStatus {
  HTR_STATUS_OK = 0,
  HTR_STATUS_NULL_POINTER = 1,
  // Malformed argument: bad UTF-8, bad dimensions, unknown characters.
  HTR_STATUS_INVALID_ARGUMENT = 2,
  // Sizes that do not fit together, such as a model and an alphabet.
  HTR_STATUS_SHAPE = 3,
  // Out-of-range parameter such as a negative alpha.
  HTR_STATUS_CONFIG = 4,
  // The matrix is too short for the requested text.
  HTR_STATUS_INFEASIBLE = 5,
  // Malformed text file.
  HTR_STATUS_PARSE = 6,
  // Malformed binary container.
  HTR_STATUS_FORMAT = 7,
  // File could not be read or written.
  HTR_STATUS_IO = 8,
  // A rate over an empty reference.
  HTR_STATUS_UNDEFINED_METRIC = 9,
  HTR_STATUS_PANIC = 10,
} HtrStatus;

// A word list together with the alphabet it is encoded in.
typedef struct HtrDictionary HtrDictionary;

// Per-timestep class probabilities.
typedef struct HtrMatrix HtrMatrix;

// A trained network with its weights.
typedef struct HtrModel HtrModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null if there was none.
// Valid until the next failing call on the same thread.
const char *htr_last_error(void);

// Releases a string returned by the library.
void htr_string_free(char *s);

// Loads a model container.
enum HtrStatus htr_model_load(const char *path, struct HtrModel **out);

void htr_model_free(struct HtrModel *model);

// Number of output classes, or 0 for a null model.
uintptr_t htr_model_classes(const struct HtrModel *model);

// Runs the model on a row-major 8-bit grayscale line image (0 ink, 255
// background). Images that are not 64 rows high are preprocessed first.
enum HtrStatus htr_model_forward(const struct HtrModel *model,
                                 const uint8_t *pixels,
                                 uintptr_t width,
                                 uintptr_t height,
                                 struct HtrMatrix **out);

// Wraps `timesteps * classes` row-major probabilities; every row must sum
// to one.
enum HtrStatus htr_matrix_new(uintptr_t timesteps,
                              uintptr_t classes,
                              const double *data,
                              struct HtrMatrix **out);

// Reads a matrix container as written by `htr recognize --dump-matrices`.
enum HtrStatus htr_matrix_load(const char *path, struct HtrMatrix **out);

enum HtrStatus htr_matrix_save(const struct HtrMatrix *matrix, const char *path);

void htr_matrix_free(struct HtrMatrix *matrix);

// Number of rows, or 0 for a null matrix.
uintptr_t htr_matrix_timesteps(const struct HtrMatrix *matrix);

// Number of columns, or 0 for a null matrix.
uintptr_t htr_matrix_classes(const struct HtrMatrix *matrix);

// Row-major probabilities owned by the matrix; null for a null matrix.
const double *htr_matrix_data(const struct HtrMatrix *matrix);

// Loads a dictionary (one word per line) in the alphabet of an alphabet
// file. Words with characters outside the alphabet are skipped.
enum HtrStatus htr_dictionary_load(const char *dict_path,
                                   const char *alphabet_path,
                                   struct HtrDictionary **out);

// Builds a dictionary from `n_words` strings. `alphabet` holds one symbol
// per line, the garbage symbol first, as in an alphabet file. An empty
// word list is allowed and makes decoding fall back to best path.
enum HtrStatus htr_dictionary_from_words(const char *alphabet,
                                         const char *const *words,
                                         uintptr_t n_words,
                                         struct HtrDictionary **out);

void htr_dictionary_free(struct HtrDictionary *dict);

// Number of distinct words, or 0 for a null dictionary.
uintptr_t htr_dictionary_len(const struct HtrDictionary *dict);

// Number of alphabet classes, or 0 for a null dictionary.
uintptr_t htr_dictionary_classes(const struct HtrDictionary *dict);

// Decodes a line with the default decoder settings and the given length
// penalty. With `tokenize` nonzero, punctuation is split off as in the
// scoring normalization. The result is released with [`htr_string_free`].
enum HtrStatus htr_decode_line(const struct HtrMatrix *matrix,
                               const struct HtrDictionary *dict,
                               double alpha,
                               int32_t tokenize,
                               char **out);

// `-ln p(text | matrix) + alpha * |text|` in the dictionary's alphabet;
// `+inf` when the matrix is too short for the text.
enum HtrStatus htr_score(const char *text,
                         const struct HtrMatrix *matrix,
                         const struct HtrDictionary *dict,
                         double alpha,
                         double *out);

// Corpus word and character error rates in percent over `n` aligned lines.
enum HtrStatus htr_error_rates(const char *const *refs,
                               const char *const *hyps,
                               uintptr_t n,
                               double *wer,
                               double *cer);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HTR_H */
